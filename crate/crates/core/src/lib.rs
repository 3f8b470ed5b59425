//! Approximate steady-state analysis of probabilistic Boolean networks.
//!
//! The crate simulates networks with perturbations and estimates the
//! long-run probability of a set of states with two sequential estimators
//! (the two-state Markov chain approach and the Skart batch-means
//! procedure). Both are parallelised by running several chains whose
//! convergence is checked with the Gelman & Rubin diagnostic.
//!
//! ```
//! use pbn_steady::model::{random_pbn, RandomPbnSpec};
//! use pbn_steady::sim::MetaProperty;
//! use pbn_steady::two_state::{run_sequential, TwoStateSettings};
//!
//! let model = random_pbn(&RandomPbnSpec::new(8, (1, 2), (1, 3)).with_perturbation(0.05), 1)?;
//! let property = MetaProperty::new("v0", &[(0, true)]);
//! let settings = TwoStateSettings { precision: 1e-2, ..Default::default() };
//! let result = run_sequential(&model, &property, &settings, 7, &Default::default())?;
//! assert!((0.0..=1.0).contains(&result.estimate));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod error;
pub mod gelman_rubin;
pub mod model;
pub mod parallel;
pub mod result;
pub mod sim;
pub mod skart;
pub mod stats;
pub mod two_state;

pub use error::{Degeneracy, EstimateError, ModelError, PropertyError, StatsError};
pub use result::{EstimateResult, Interval};
