use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PbnModel, PredictorFunction, TruthTable, MAX_PARENTS};
use crate::error::ModelError;

/// Structure parameters for a randomly generated network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomPbnSpec {
    pub nodes: usize,
    pub min_functions: usize,
    pub max_functions: usize,
    pub min_parents: usize,
    pub max_parents: usize,
    pub perturbation: f64,
}

impl RandomPbnSpec {
    pub fn new(nodes: usize, functions: (usize, usize), parents: (usize, usize)) -> Self {
        Self {
            nodes,
            min_functions: functions.0,
            max_functions: functions.1,
            min_parents: parents.0,
            max_parents: parents.1,
            perturbation: 0.01,
        }
    }

    pub fn with_perturbation(mut self, p: f64) -> Self {
        self.perturbation = p;
        self
    }

    fn check(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::Arguments(m));
        if self.nodes == 0 {
            return err("node count must be at least 1".into());
        }
        if self.min_functions == 0 || self.min_functions > self.max_functions {
            return err(format!(
                "function count range {}..={} must satisfy 1 <= min <= max",
                self.min_functions, self.max_functions
            ));
        }
        if self.min_parents > self.max_parents {
            return err(format!(
                "parent count range {}..={} is empty",
                self.min_parents, self.max_parents
            ));
        }
        if self.max_parents > self.nodes {
            return err(format!(
                "max parents {} exceeds node count {}",
                self.max_parents, self.nodes
            ));
        }
        if self.max_parents > MAX_PARENTS {
            return err(format!(
                "max parents {} exceeds the supported maximum {MAX_PARENTS}",
                self.max_parents
            ));
        }
        if !(self.perturbation > 0.0 && self.perturbation < 1.0) {
            return err(format!("perturbation {} outside (0, 1)", self.perturbation));
        }
        Ok(())
    }
}

/// Generates a random network; identical arguments give identical models.
///
/// Function counts and parent counts are uniform over their ranges, parents
/// are drawn without replacement, truth-table entries are fair coin flips and
/// selection probabilities are normalised uniform variates.
pub fn random_pbn(spec: &RandomPbnSpec, seed: u64) -> Result<PbnModel, ModelError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.nodes;
    let mut functions = Vec::with_capacity(n);
    for _ in 0..n {
        let count = rng.gen_range(spec.min_functions..=spec.max_functions);
        // (0, 1] keeps every weight strictly positive.
        let weights: Vec<f64> = (0..count).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let mut set = Vec::with_capacity(count);
        for w in weights {
            let k = rng.gen_range(spec.min_parents..=spec.max_parents);
            let parents = index::sample(&mut rng, n, k).into_vec();
            let len = 1usize << k;
            let words = (0..len.div_ceil(64)).map(|_| rng.gen::<u64>()).collect();
            set.push(PredictorFunction::new(
                parents,
                TruthTable::from_words(words, len),
                w / total,
            ));
        }
        functions.push(set);
    }
    PbnModel::new(functions, spec.perturbation, None)
}
