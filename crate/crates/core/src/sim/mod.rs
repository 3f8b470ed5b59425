//! Trajectory simulation: stepping, meta-state abstraction and chain sets.

mod bits;
mod chain;
mod property;
mod source;
mod step;

pub use bits::{BitSeq, TransitionCounts};
pub use chain::{
    extend_chains, Chain, ChainSet, InitialState, SimOptions, WorkerPool, DEFAULT_STEP_CAP,
};
pub use property::{
    abstract_state, parse_properties, serialize_properties, Constraint, MetaProperty,
};
pub use source::{BitSource, FixedSource, ModelSource, SyntheticKind, SyntheticSource};
pub use step::{step, stream_rng, uniform_state, ChainRng, PerturbationMode, Stepper};
