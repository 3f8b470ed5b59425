use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("probability {0} outside the open interval (0, 1)")]
    Domain(f64),
    #[error("degrees of freedom must be at least 1")]
    DegreesOfFreedom,
}

/// One broken model invariant, located by node (and function when relevant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: Option<usize>,
    pub function: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NodeCount,
    NodeListLength,
    Perturbation,
    NoFunctions,
    ProbabilityRange,
    ProbabilitySum,
    ParentOutOfRange,
    DuplicateParent,
    TooManyParents,
    TableLength,
    NameCount,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NodeCount => "node count must be at least 1",
            Rule::NodeListLength => "one function list per node",
            Rule::Perturbation => "perturbation probability must lie in (0, 1)",
            Rule::NoFunctions => "every node needs at least one predictor function",
            Rule::ProbabilityRange => "selection probability must lie in (0, 1]",
            Rule::ProbabilitySum => "selection probabilities must sum to 1",
            Rule::ParentOutOfRange => "parent index out of range",
            Rule::DuplicateParent => "parent indices must be distinct",
            Rule::TooManyParents => "parent count exceeds the supported maximum",
            Rule::TableLength => "truth table length must be 2^parents",
            Rule::NameCount => "one name per node",
        };
        f.write_str(s)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.node, self.function) {
            (Some(n), Some(j)) => write!(f, "node {n}, function {j}: ")?,
            (Some(n), None) => write!(f, "node {n}: ")?,
            _ => {}
        }
        write!(f, "{} ({})", self.rule, self.detail)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("malformed model file at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed model file, field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("invalid generator arguments: {0}")]
    Arguments(String),
    #[error("exact analysis refused: {n} nodes means {states} states (limit is 2^{limit})")]
    TooLarge { n: usize, states: u128, limit: usize },
    #[error("power iteration did not settle after {iterations} iterations (last change {change:e})")]
    NotConverged { iterations: usize, change: f64 },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum PropertyError {
    #[error("malformed property file: {0}")]
    Syntax(String),
    #[error("property `{name}`: node {node} out of range for a {n}-node model")]
    NodeOutOfRange { name: String, node: usize, n: usize },
    #[error("property `{name}`: node {node} constrained more than once")]
    DuplicateNode { name: String, node: usize },
}

/// Why an abstraction could not be analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    /// Every observed state satisfied the property.
    AlwaysInterest,
    /// No observed state satisfied the property.
    NeverInterest,
    /// The abstraction alternated on every step (alpha = beta = 1).
    Periodic,
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Degeneracy::AlwaysInterest => "always in meta state 1",
            Degeneracy::NeverInterest => "never in meta state 1",
            Degeneracy::Periodic => "meta state alternates on every step",
        })
    }
}

#[derive(Debug, Clone, Error)]
pub enum EstimateError {
    #[error("degenerate abstraction after {steps} steps: {kind}")]
    Degenerate { kind: Degeneracy, steps: u64 },
    #[error("step cap of {cap} exceeded (requested {requested})")]
    CapExceeded { cap: u64, requested: u64 },
    #[error("chains did not converge within the step cap; R-hat trace: {trace:?}")]
    NotConverged { trace: Vec<f64> },
    #[error("invalid settings: {0}")]
    Settings(String),
}

impl EstimateError {
    /// True for failures caused by the property rather than the run budget.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, EstimateError::Degenerate { .. })
    }
}
