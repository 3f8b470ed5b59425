use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{NetworkState, PbnModel};

/// Random stream owned by one chain.
pub type ChainRng = ChaCha8Rng;

/// Stream `stream` of the generator keyed by `seed`. Streams of one key
/// never overlap, so chain `i` of a run always sees the same numbers no
/// matter how chains are scheduled.
pub fn stream_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How perturbation vectors are drawn. Both modes sample the same
/// distribution but consume the random stream differently.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationMode {
    /// One Bernoulli draw per node and step.
    #[default]
    PerNode,
    /// Jumps straight to the next flipped node with geometric gaps.
    GeometricSkip,
}

#[derive(Debug, Clone)]
enum Selector {
    Single,
    /// Cumulative thresholds on a uniform `u64`; the last one is `u64::MAX`.
    Cumulative(Vec<u64>),
}

/// Precomputed sampling tables for advancing states of one model.
#[derive(Debug, Clone)]
pub struct Stepper<'m> {
    model: &'m PbnModel,
    mode: PerturbationMode,
    flip_threshold: u64,
    ln_keep: f64,
    selectors: Vec<Selector>,
}

#[inline]
fn unit_open_closed(rng: &mut impl RngCore) -> f64 {
    // (0, 1]
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn threshold(p: f64) -> u64 {
    if p >= 1.0 {
        u64::MAX
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m PbnModel, mode: PerturbationMode) -> Self {
        let selectors = model
            .functions
            .iter()
            .map(|set| {
                if set.len() == 1 {
                    return Selector::Single;
                }
                let total: f64 = set.iter().map(|f| f.probability).sum();
                let mut acc = 0.0;
                let mut cum: Vec<u64> = set
                    .iter()
                    .map(|f| {
                        acc += f.probability / total;
                        threshold(acc)
                    })
                    .collect();
                *cum.last_mut().expect("non-empty set") = u64::MAX;
                Selector::Cumulative(cum)
            })
            .collect();
        Self {
            model,
            mode,
            flip_threshold: threshold(model.perturbation),
            ln_keep: (-model.perturbation).ln_1p(),
            selectors,
        }
    }

    pub fn model(&self) -> &'m PbnModel {
        self.model
    }

    pub fn mode(&self) -> PerturbationMode {
        self.mode
    }

    /// Draws the perturbation vector and applies it to `state`. Returns
    /// whether any node flipped.
    #[inline]
    fn perturb(&self, state: &mut NetworkState, rng: &mut impl RngCore) -> bool {
        let n = self.model.n;
        match self.mode {
            PerturbationMode::PerNode => {
                let mut any = false;
                for i in 0..n {
                    if rng.next_u64() < self.flip_threshold {
                        state.flip(i);
                        any = true;
                    }
                }
                any
            }
            PerturbationMode::GeometricSkip => {
                let mut any = false;
                let mut i = self.gap(rng);
                while i < n as u64 {
                    state.flip(i as usize);
                    any = true;
                    i += 1 + self.gap(rng);
                }
                any
            }
        }
    }

    #[inline]
    fn gap(&self, rng: &mut impl RngCore) -> u64 {
        let g = (unit_open_closed(rng).ln() / self.ln_keep).floor();
        if g >= u64::MAX as f64 {
            u64::MAX
        } else {
            g as u64
        }
    }

    /// Advances `state` by one step, using `scratch` for the synchronous
    /// update. Returns whether the step was a perturbation.
    #[inline]
    pub fn advance(
        &self,
        state: &mut NetworkState,
        scratch: &mut NetworkState,
        rng: &mut impl RngCore,
    ) -> bool {
        if self.perturb(state, rng) {
            return true;
        }
        for w in scratch.words_mut() {
            *w = 0;
        }
        for (i, (set, sel)) in self.model.functions.iter().zip(&self.selectors).enumerate() {
            let f = match sel {
                Selector::Single => &set[0],
                Selector::Cumulative(cum) => {
                    let u = rng.next_u64();
                    let j = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
                    &set[j]
                }
            };
            if f.eval(state) {
                scratch.set(i, true);
            }
        }
        std::mem::swap(state, scratch);
        false
    }
}

/// One transition of the network: perturb with probability `p` per node,
/// otherwise apply a randomly selected realisation.
pub fn step(model: &PbnModel, state: &NetworkState, rng: &mut impl RngCore) -> NetworkState {
    let stepper = Stepper::new(model, PerturbationMode::PerNode);
    let mut next = state.clone();
    let mut scratch = NetworkState::zeros(model.n);
    stepper.advance(&mut next, &mut scratch, rng);
    next
}

/// Draws a state uniformly from `{0,1}^n`.
pub fn uniform_state(n: usize, rng: &mut impl RngCore) -> NetworkState {
    let mut s = NetworkState::zeros(n);
    for w in s.words_mut() {
        *w = rng.next_u64();
    }
    s.mask_tail();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PredictorFunction, TruthTable};

    /// Replays a fixed list of `u64`s.
    struct Scripted(Vec<u64>, usize);

    impl RngCore for Scripted {
        fn next_u32(&mut self) -> u32 {
            self.next_u64() as u32
        }
        fn next_u64(&mut self) -> u64 {
            let v = self.0[self.1 % self.0.len()];
            self.1 += 1;
            v
        }
        fn fill_bytes(&mut self, _: &mut [u8]) {
            unimplemented!()
        }
        fn try_fill_bytes(&mut self, _: &mut [u8]) -> Result<(), rand::Error> {
            unimplemented!()
        }
    }

    fn three_node_constant_true() -> PbnModel {
        PbnModel::new(
            (0..3).map(|_| vec![PredictorFunction::constant(true, 1.0)]).collect(),
            0.01,
            None,
        )
        .unwrap()
    }

    #[test]
    fn forced_update_without_perturbation() {
        let m = three_node_constant_true();
        // every draw is far above the flip threshold
        let mut rng = Scripted(vec![u64::MAX], 0);
        let next = step(&m, &NetworkState::from_bits(&[false, true, false]), &mut rng);
        assert_eq!(next, NetworkState::from_bits(&[true, true, true]));
    }

    #[test]
    fn forced_perturbation_xors() {
        let m = three_node_constant_true();
        // gamma = (0, 1, 0)
        let mut rng = Scripted(vec![u64::MAX, 0, u64::MAX], 0);
        let next = step(&m, &NetworkState::from_bits(&[true, false, true]), &mut rng);
        assert_eq!(next, NetworkState::from_bits(&[true, true, true]));
    }

    #[test]
    fn selection_follows_cumulative_thresholds() {
        // node 0 picks constant-false w.p. 0.25, constant-true w.p. 0.75
        let m = PbnModel::new(
            vec![vec![
                PredictorFunction::constant(false, 0.25),
                PredictorFunction::new(vec![], TruthTable::from_bits(&[true]), 0.75),
            ]],
            0.01,
            None,
        )
        .unwrap();
        let s = NetworkState::zeros(1);
        let low = Scripted(vec![u64::MAX, 1 << 60], 0);
        let high = Scripted(vec![u64::MAX, u64::MAX - 1], 0);
        assert!(!step(&m, &s, &mut { low }).get(0));
        assert!(step(&m, &s, &mut { high }).get(0));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map({
            let mut r = stream_rng(9, 0);
            move |_| r.next_u64()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = stream_rng(9, 0);
            move |_| r.next_u64()
        }).collect();
        let c: Vec<u64> = (0..4).map({
            let mut r = stream_rng(9, 1);
            move |_| r.next_u64()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_state_masks_padding() {
        let mut rng = stream_rng(1, 0);
        for n in [1, 5, 64, 65, 130] {
            let s = uniform_state(n, &mut rng);
            let rem = n % 64;
            if rem != 0 {
                assert_eq!(s.words().last().unwrap() >> rem, 0);
            }
        }
    }
}
