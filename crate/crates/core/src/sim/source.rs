//! Sources of abstracted 0-1 trajectories consumed by the estimators.

use rand::RngCore;

use super::bits::BitSeq;
use super::chain::{ChainSet, WorkerPool};
use super::step::{stream_rng, ChainRng};
use crate::error::EstimateError;
use crate::model::PbnModel;

/// One or more equally long 0-1 trajectories that can be extended on demand.
pub trait BitSource {
    fn chains(&self) -> usize;

    /// Per-chain length.
    fn len(&self) -> u64;

    /// Extends every chain to at least `len` elements.
    fn extend_to(&mut self, len: u64) -> Result<(), EstimateError>;

    fn bits(&self, chain: usize) -> &BitSeq;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn total_steps(&self) -> u64 {
        self.len() * self.chains() as u64
    }
}

fn check_cap(cap: u64, chains: usize, len: u64) -> Result<(), EstimateError> {
    let requested = len.saturating_mul(chains as u64);
    if requested > cap {
        Err(EstimateError::CapExceeded { cap, requested })
    } else {
        Ok(())
    }
}

/// Abstraction of one property over the chains of a [`ChainSet`].
pub struct ModelSource<'a> {
    model: &'a PbnModel,
    set: ChainSet,
    property: usize,
    pool: &'a WorkerPool,
    cap: u64,
}

impl<'a> ModelSource<'a> {
    pub fn new(
        model: &'a PbnModel,
        set: ChainSet,
        property: usize,
        pool: &'a WorkerPool,
        cap: u64,
    ) -> Self {
        assert!(property < set.properties().len());
        Self {
            model,
            set,
            property,
            pool,
            cap,
        }
    }

    pub fn set(&self) -> &ChainSet {
        &self.set
    }

    pub fn into_set(self) -> ChainSet {
        self.set
    }
}

impl BitSource for ModelSource<'_> {
    fn chains(&self) -> usize {
        self.set.omega()
    }

    fn len(&self) -> u64 {
        self.set.len()
    }

    fn extend_to(&mut self, len: u64) -> Result<(), EstimateError> {
        check_cap(self.cap, self.chains(), len)?;
        self.set.extend_to(self.model, len, self.pool);
        Ok(())
    }

    fn bits(&self, chain: usize) -> &BitSeq {
        self.set.chains()[chain].history(self.property)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    /// Independent Bernoulli(q) draws.
    Iid { q: f64 },
    /// First-order two-state chain, `alpha = P(0 -> 1)`, `beta = P(1 -> 0)`,
    /// started from its stationary distribution.
    Markov { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone)]
struct SyntheticChain {
    rng: ChainRng,
    bits: BitSeq,
    state: bool,
}

/// Bit streams with known statistics, for calibrating the estimators.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    kind: SyntheticKind,
    chains: Vec<SyntheticChain>,
    cap: u64,
}

#[inline]
fn bernoulli(rng: &mut impl RngCore, p: f64) -> bool {
    ((rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)) < p
}

impl SyntheticSource {
    pub fn new(kind: SyntheticKind, chains: usize, seed: u64) -> Self {
        let chains = (0..chains as u64)
            .map(|id| {
                let mut rng = stream_rng(seed, id);
                let state = match kind {
                    SyntheticKind::Iid { .. } => false,
                    SyntheticKind::Markov { alpha, beta } => {
                        bernoulli(&mut rng, alpha / (alpha + beta))
                    }
                };
                SyntheticChain {
                    rng,
                    bits: BitSeq::new(),
                    state,
                }
            })
            .collect();
        Self {
            kind,
            chains,
            cap: super::chain::DEFAULT_STEP_CAP,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    /// Stationary probability of a 1.
    pub fn mean(&self) -> f64 {
        match self.kind {
            SyntheticKind::Iid { q } => q,
            SyntheticKind::Markov { alpha, beta } => alpha / (alpha + beta),
        }
    }
}

impl BitSource for SyntheticSource {
    fn chains(&self) -> usize {
        self.chains.len()
    }

    fn len(&self) -> u64 {
        self.chains.first().map_or(0, |c| c.bits.len())
    }

    fn extend_to(&mut self, len: u64) -> Result<(), EstimateError> {
        check_cap(self.cap, self.chains(), len)?;
        let kind = self.kind;
        for c in &mut self.chains {
            while c.bits.len() < len {
                c.state = match kind {
                    SyntheticKind::Iid { q } => bernoulli(&mut c.rng, q),
                    SyntheticKind::Markov { alpha, beta } => {
                        if c.state {
                            !bernoulli(&mut c.rng, beta)
                        } else {
                            bernoulli(&mut c.rng, alpha)
                        }
                    }
                };
                c.bits.push(c.state);
            }
        }
        Ok(())
    }

    fn bits(&self, chain: usize) -> &BitSeq {
        &self.chains[chain].bits
    }
}

/// A fixed, non-extendable bit sequence.
#[derive(Debug, Clone)]
pub struct FixedSource {
    bits: BitSeq,
}

impl FixedSource {
    pub fn new(bits: BitSeq) -> Self {
        Self { bits }
    }
}

impl BitSource for FixedSource {
    fn chains(&self) -> usize {
        1
    }

    fn len(&self) -> u64 {
        self.bits.len()
    }

    fn extend_to(&mut self, len: u64) -> Result<(), EstimateError> {
        if len > self.bits.len() {
            return Err(EstimateError::CapExceeded {
                cap: self.bits.len(),
                requested: len,
            });
        }
        Ok(())
    }

    fn bits(&self, _chain: usize) -> &BitSeq {
        &self.bits
    }
}
