use rayon::prelude::*;

use super::bits::BitSeq;
use super::property::{CompiledProperty, MetaProperty};
use super::step::{stream_rng, uniform_state, ChainRng, PerturbationMode, Stepper};
use crate::model::{NetworkState, PbnModel};

/// Default bound on the total number of simulated steps of one run.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

/// Where each chain starts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum InitialState {
    /// Independent uniform draw from the chain's own stream.
    #[default]
    Uniform,
    Fixed(NetworkState),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOptions {
    pub perturbation: PerturbationMode,
    pub initial: InitialState,
    /// Upper bound on simulated steps, summed over all chains.
    pub cap: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            perturbation: PerturbationMode::PerNode,
            initial: InitialState::Uniform,
            cap: DEFAULT_STEP_CAP,
        }
    }
}

/// One simulated trajectory. Only the current state and the abstracted
/// bits of each registered property are kept.
#[derive(Debug, Clone)]
pub struct Chain {
    pub id: u64,
    current: NetworkState,
    scratch: NetworkState,
    histories: Vec<BitSeq>,
    rng: ChainRng,
    length: u64,
    perturbations: u64,
}

impl Chain {
    fn new(model: &PbnModel, id: u64, seed: u64, properties: usize, init: &InitialState) -> Self {
        let mut rng = stream_rng(seed, id);
        let current = match init {
            InitialState::Uniform => uniform_state(model.n, &mut rng),
            InitialState::Fixed(s) => {
                assert_eq!(s.len(), model.n, "initial state has wrong length");
                s.clone()
            }
        };
        Self {
            id,
            scratch: NetworkState::zeros(model.n),
            current,
            histories: vec![BitSeq::new(); properties],
            rng,
            length: 0,
            perturbations: 0,
        }
    }

    fn advance(&mut self, stepper: &Stepper<'_>, props: &[CompiledProperty], steps: u64) {
        for h in &mut self.histories {
            h.reserve(steps);
        }
        for _ in 0..steps {
            if stepper.advance(&mut self.current, &mut self.scratch, &mut self.rng) {
                self.perturbations += 1;
            }
            for (h, p) in self.histories.iter_mut().zip(props) {
                h.push(p.holds(&self.current));
            }
        }
        self.length += steps;
    }

    pub fn current(&self) -> &NetworkState {
        &self.current
    }

    /// Steps taken; equals every history's length.
    pub fn len(&self) -> u64 {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn history(&self, property: usize) -> &BitSeq {
        &self.histories[property]
    }

    /// Number of steps whose perturbation vector was non-zero.
    pub fn perturbations(&self) -> u64 {
        self.perturbations
    }
}

/// Executes chain extensions on a fixed number of worker threads.
#[derive(Debug)]
pub struct WorkerPool {
    pool: Option<rayon::ThreadPool>,
    workers: usize,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let pool = (workers > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("thread pool")
        });
        Self { pool, workers }
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn for_each_chain<F>(&self, chains: &mut [Chain], f: F)
    where
        F: Fn(&mut Chain) + Sync + Send,
    {
        match &self.pool {
            None => chains.iter_mut().for_each(f),
            Some(pool) => pool.install(|| chains.par_iter_mut().with_max_len(1).for_each(f)),
        }
    }
}

/// A group of chains of equal length sharing a model and property list.
#[derive(Debug, Clone)]
pub struct ChainSet {
    chains: Vec<Chain>,
    /// Burn-in length; the first `psi` elements of every chain are discarded.
    pub psi: u64,
    properties: Vec<MetaProperty>,
    compiled: Vec<CompiledProperty>,
    mode: PerturbationMode,
}

impl ChainSet {
    /// Creates `omega` chains with ids `0..omega`, chain `i` drawing from
    /// stream `i` of `seed`.
    pub fn new(
        model: &PbnModel,
        properties: Vec<MetaProperty>,
        omega: usize,
        seed: u64,
        options: &SimOptions,
    ) -> Self {
        let compiled = properties.iter().map(|p| p.compile(model.n)).collect();
        let chains = (0..omega as u64)
            .map(|id| Chain::new(model, id, seed, properties.len(), &options.initial))
            .collect();
        Self {
            chains,
            psi: 0,
            properties,
            compiled,
            mode: options.perturbation,
        }
    }

    pub fn omega(&self) -> usize {
        self.chains.len()
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn properties(&self) -> &[MetaProperty] {
        &self.properties
    }

    pub fn perturbation_mode(&self) -> PerturbationMode {
        self.mode
    }

    /// Common chain length.
    pub fn len(&self) -> u64 {
        self.chains.first().map_or(0, Chain::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total steps simulated over all chains.
    pub fn total_steps(&self) -> u64 {
        self.len() * self.chains.len() as u64
    }

    /// Advances every chain by exactly `by` steps.
    pub fn extend(&mut self, model: &PbnModel, by: u64, pool: &WorkerPool) {
        if by == 0 {
            return;
        }
        let stepper = Stepper::new(model, self.mode);
        let compiled = &self.compiled;
        pool.for_each_chain(&mut self.chains, |c| c.advance(&stepper, compiled, by));
    }

    pub fn extend_to(&mut self, model: &PbnModel, len: u64, pool: &WorkerPool) {
        let cur = self.len();
        if len > cur {
            self.extend(model, len - cur, pool);
        }
    }
}

/// Advances all chains of `set` by `by` steps using `workers` threads.
/// The result does not depend on `workers`.
pub fn extend_chains(model: &PbnModel, set: &mut ChainSet, by: u64, workers: usize) {
    set.extend(model, by, &WorkerPool::new(workers));
}
