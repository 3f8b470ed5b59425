//! Exact stationary distribution for small networks by power iteration.
//!
//! The transition matrix is never materialised. One application of `P` is
//! the function-update mixture weighted by `(1-p)^n` (no node perturbed)
//! plus the perturbation kernel `p^h (1-p)^(n-h)` over non-zero flip
//! vectors, which factorises per node and is applied with one butterfly pass
//! per bit.

use super::{NetworkState, PbnModel};
use crate::error::ModelError;

pub const EXACT_MAX_NODES: usize = 20;

const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;

/// Stationary probabilities indexed by the integer encoding of a state
/// (node `i` is bit `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub probabilities: Vec<f64>,
    pub iterations: usize,
}

impl ExactDistribution {
    pub fn n(&self) -> usize {
        self.probabilities.len().trailing_zeros() as usize
    }

    pub fn probability(&self, state: &NetworkState) -> f64 {
        self.probabilities[state.to_index() as usize]
    }

    /// Total mass of the states accepted by `pred`.
    pub fn mass<F: Fn(&NetworkState) -> bool>(&self, pred: F) -> f64 {
        let n = self.n();
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(s, _)| pred(&NetworkState::from_index(n, *s as u64)))
            .map(|(_, p)| p)
            .sum()
    }
}

fn check_size(model: &PbnModel) -> Result<(), ModelError> {
    if model.n > EXACT_MAX_NODES {
        return Err(ModelError::TooLarge {
            n: model.n,
            states: 1u128 << model.n.min(127),
            limit: EXACT_MAX_NODES,
        });
    }
    Ok(())
}

/// Power iteration from the uniform distribution until the largest entry
/// change drops below 1e-12.
pub fn exact_steady_state(model: &PbnModel) -> Result<ExactDistribution, ModelError> {
    check_size(model)?;
    let size = 1usize << model.n;
    exact_steady_state_from(model, vec![1.0 / size as f64; size])
}

/// Power iteration from an arbitrary start distribution.
pub fn exact_steady_state_from(
    model: &PbnModel,
    start: Vec<f64>,
) -> Result<ExactDistribution, ModelError> {
    check_size(model)?;
    assert_eq!(start.len(), 1usize << model.n, "start vector has wrong length");
    let mut pi = start;
    let mut change = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let next = transition_step(model, &pi);
        change = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if change < TOLERANCE {
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|x| *x /= total);
            return Ok(ExactDistribution {
                probabilities: pi,
                iterations: it,
            });
        }
    }
    Err(ModelError::NotConverged {
        iterations: MAX_ITERATIONS,
        change,
    })
}

/// Computes `pi * P` for the network's transition matrix.
pub fn transition_step(model: &PbnModel, pi: &[f64]) -> Vec<f64> {
    let n = model.n;
    let size = 1usize << n;
    assert_eq!(pi.len(), size);
    let p = model.perturbation;
    let quiet = (1.0 - p).powi(n as i32);

    // Perturbation part: full product kernel, minus its zero-flip term.
    let mut out = pi.to_vec();
    for b in 0..n {
        let bit = 1usize << b;
        for x in 0..size {
            if x & bit == 0 {
                let y = x | bit;
                let (a, c) = (out[x], out[y]);
                out[x] = (1.0 - p) * a + p * c;
                out[y] = p * a + (1.0 - p) * c;
            }
        }
    }
    for (o, &x) in out.iter_mut().zip(pi) {
        *o = (*o - quiet * x).max(0.0);
    }

    // Function part: next-state bits are independent across nodes given s.
    let mut random: Vec<(usize, f64)> = Vec::with_capacity(n);
    let mut spread: Vec<(usize, f64)> = Vec::with_capacity(size);
    for (s, &mass) in pi.iter().enumerate() {
        let weight = mass * quiet;
        if weight == 0.0 {
            continue;
        }
        let state = NetworkState::from_index(n, s as u64);
        let mut fixed_one = 0usize;
        random.clear();
        for (i, set) in model.functions.iter().enumerate() {
            let total: f64 = set.iter().map(|f| f.probability).sum();
            let on: f64 = set
                .iter()
                .filter(|f| f.eval(&state))
                .map(|f| f.probability)
                .sum();
            if on == 0.0 {
                continue;
            } else if on == total {
                fixed_one |= 1 << i;
            } else {
                random.push((i, on / total));
            }
        }
        spread.clear();
        spread.push((fixed_one, weight));
        for &(i, q) in &random {
            let len = spread.len();
            for k in 0..len {
                let (idx, w) = spread[k];
                spread[k] = (idx, w * (1.0 - q));
                spread.push((idx | (1 << i), w * q));
            }
        }
        for &(idx, w) in &spread {
            out[idx] += w;
        }
    }
    out
}
