use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::Degeneracy;
use crate::skart::BatchPlan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn half_width(&self, centre: f64) -> f64 {
        (centre - self.low).max(self.high - centre)
    }
}

/// Outcome of one steady-state estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimate: f64,
    /// Confidence interval, reported by the batch-means estimators only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<Interval>,
    /// Number of abstracted elements the estimate is computed from.
    pub sample_size: u64,
    /// Elements discarded at the start of each chain.
    pub burn_in: u64,
    /// Steps simulated in total, over all chains.
    pub simulated_steps: u64,
    /// Sample size demanded by the stopping rule at exit, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_sample_size: Option<u64>,
    pub extensions: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batching: Option<BatchPlan>,
    /// Set when the answer follows from a degenerate abstraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<Degeneracy>,
    #[serde(with = "secs")]
    pub wall_time: Duration,
}

impl EstimateResult {
    pub(crate) fn trivial(estimate: f64, flag: Degeneracy, wall_time: Duration) -> Self {
        Self {
            estimate,
            ci: None,
            sample_size: 0,
            burn_in: 0,
            simulated_steps: 0,
            required_sample_size: None,
            extensions: 0,
            batching: None,
            flag: Some(flag),
            wall_time,
        }
    }

    /// Equality ignoring `wall_time`.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        a == *other
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}
