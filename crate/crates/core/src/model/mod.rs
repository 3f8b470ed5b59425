//! Probabilistic Boolean network model: structure, validation and density.

mod exact;
mod io;
mod random;
mod state;

pub use exact::{
    exact_steady_state, exact_steady_state_from, transition_step, ExactDistribution,
    EXACT_MAX_NODES,
};
pub use io::{parse_model, serialize_model, MODEL_FORMAT};
pub use random::{random_pbn, RandomPbnSpec};
pub use state::NetworkState;

use crate::error::{ModelError, Rule, Violation};

/// Selection probabilities of a node may deviate from 1 by at most this much.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Largest supported parent count; a truth table over 24 parents is 2 MiB.
pub const MAX_PARENTS: usize = 24;

/// Truth table of a Boolean function, one bit per parent assignment.
///
/// Entry `k` is the output when the parents, read with `parents[0]` as the
/// most significant bit, spell the binary number `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    words: Vec<u64>,
    len: usize,
}

impl TruthTable {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64).max(1)],
            len,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut t = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            t.set(i, b);
        }
        t
    }

    pub(crate) fn from_words(words: Vec<u64>, len: usize) -> Self {
        let mut t = Self { words, len };
        let rem = len & 63;
        if rem != 0 {
            if let Some(last) = t.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
        t
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, k: usize) -> bool {
        debug_assert!(k < self.len);
        (self.words[k >> 6] >> (k & 63)) & 1 == 1
    }

    pub fn set(&mut self, k: usize, value: bool) {
        assert!(k < self.len);
        let mask = 1u64 << (k & 63);
        if value {
            self.words[k >> 6] |= mask;
        } else {
            self.words[k >> 6] &= !mask;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorFunction {
    pub parents: Vec<usize>,
    pub table: TruthTable,
    pub probability: f64,
}

impl PredictorFunction {
    pub fn new(parents: Vec<usize>, table: TruthTable, probability: f64) -> Self {
        Self {
            parents,
            table,
            probability,
        }
    }

    /// The constant function with no parents.
    pub fn constant(value: bool, probability: f64) -> Self {
        Self::new(Vec::new(), TruthTable::from_bits(&[value]), probability)
    }

    /// Copies the value of a single parent.
    pub fn identity(parent: usize, probability: f64) -> Self {
        Self::new(
            vec![parent],
            TruthTable::from_bits(&[false, true]),
            probability,
        )
    }

    pub fn arity(&self) -> usize {
        self.parents.len()
    }

    #[inline]
    pub fn eval(&self, state: &NetworkState) -> bool {
        let mut idx = 0usize;
        for &p in &self.parents {
            idx = (idx << 1) | state.get(p) as usize;
        }
        self.table.get(idx)
    }
}

/// A probabilistic Boolean network with perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct PbnModel {
    pub n: usize,
    /// `functions[i]` is the predictor set of node `i`.
    pub functions: Vec<Vec<PredictorFunction>>,
    /// Per-node, per-step flip probability.
    pub perturbation: f64,
    pub names: Option<Vec<String>>,
}

impl PbnModel {
    /// Builds a model and checks every structural invariant.
    pub fn new(
        functions: Vec<Vec<PredictorFunction>>,
        perturbation: f64,
        names: Option<Vec<String>>,
    ) -> Result<Self, ModelError> {
        let model = Self {
            n: functions.len(),
            functions,
            perturbation,
            names,
        };
        let violations = model.validate();
        if violations.is_empty() {
            Ok(model)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    pub fn density(&self) -> f64 {
        density(self)
    }

    /// Number of realisations, i.e. the product of the predictor set sizes.
    /// Saturates at `u128::MAX`.
    pub fn realisation_count(&self) -> u128 {
        self.functions
            .iter()
            .fold(1u128, |acc, f| acc.saturating_mul(f.len() as u128))
    }

    pub fn function_count(&self) -> usize {
        self.functions.iter().map(Vec::len).sum()
    }

    /// Applies one realisation synchronously to `state`.
    pub fn apply(&self, realisation: &Realisation, state: &NetworkState) -> NetworkState {
        let mut next = NetworkState::zeros(self.n);
        for (i, &j) in realisation.choice.iter().enumerate() {
            next.set(i, self.functions[i][j].eval(state));
        }
        next
    }
}

/// One joint choice of predictor functions, `choice[i]` indexing node `i`'s set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realisation {
    pub choice: Vec<usize>,
}

impl Realisation {
    pub fn probability(&self, model: &PbnModel) -> f64 {
        self.choice
            .iter()
            .enumerate()
            .map(|(i, &j)| model.functions[i][j].probability)
            .product()
    }
}

fn violation(node: Option<usize>, function: Option<usize>, rule: Rule, detail: String) -> Violation {
    Violation {
        node,
        function,
        rule,
        detail,
    }
}

/// Lists every broken invariant; empty means the model is valid.
pub fn validate(model: &PbnModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = model.n;
    if n == 0 {
        out.push(violation(None, None, Rule::NodeCount, "n = 0".into()));
    }
    if model.functions.len() != n {
        out.push(violation(
            None,
            None,
            Rule::NodeListLength,
            format!("{} function lists for {} nodes", model.functions.len(), n),
        ));
    }
    if !(model.perturbation > 0.0 && model.perturbation < 1.0) {
        out.push(violation(
            None,
            None,
            Rule::Perturbation,
            format!("p = {}", model.perturbation),
        ));
    }
    if let Some(names) = &model.names {
        if names.len() != n {
            out.push(violation(
                None,
                None,
                Rule::NameCount,
                format!("{} names for {} nodes", names.len(), n),
            ));
        }
    }
    for (i, set) in model.functions.iter().enumerate() {
        if set.is_empty() {
            out.push(violation(Some(i), None, Rule::NoFunctions, "empty set".into()));
            continue;
        }
        let mut sum = 0.0;
        for (j, f) in set.iter().enumerate() {
            sum += f.probability;
            if !(f.probability > 0.0 && f.probability <= 1.0) {
                out.push(violation(
                    Some(i),
                    Some(j),
                    Rule::ProbabilityRange,
                    format!("c = {}", f.probability),
                ));
            }
            let mut seen = std::collections::HashSet::new();
            for &p in &f.parents {
                if p >= n {
                    out.push(violation(
                        Some(i),
                        Some(j),
                        Rule::ParentOutOfRange,
                        format!("parent {p} with n = {n}"),
                    ));
                } else if !seen.insert(p) {
                    out.push(violation(
                        Some(i),
                        Some(j),
                        Rule::DuplicateParent,
                        format!("parent {p} repeated"),
                    ));
                }
            }
            if f.arity() > MAX_PARENTS {
                out.push(violation(
                    Some(i),
                    Some(j),
                    Rule::TooManyParents,
                    format!("{} parents, maximum {MAX_PARENTS}", f.arity()),
                ));
            } else if f.table.len() != 1usize << f.arity() {
                out.push(violation(
                    Some(i),
                    Some(j),
                    Rule::TableLength,
                    format!(
                        "{} entries for {} parents, expected {}",
                        f.table.len(),
                        f.arity(),
                        1usize << f.arity()
                    ),
                ));
            }
        }
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            out.push(violation(
                Some(i),
                None,
                Rule::ProbabilitySum,
                format!("sum = {sum}"),
            ));
        }
    }
    out
}

/// Summed parent counts of all predictor functions divided by the node count.
pub fn density(model: &PbnModel) -> f64 {
    let total: usize = model
        .functions
        .iter()
        .flat_map(|set| set.iter().map(PredictorFunction::arity))
        .sum();
    total as f64 / model.n as f64
}
