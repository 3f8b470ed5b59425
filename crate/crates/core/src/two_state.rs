//! Two-state Markov chain approach.
//!
//! The 0-1 abstraction of a trajectory is treated as a first-order two-state
//! chain with transition probabilities `alpha` (0 -> 1) and `beta` (1 -> 0).
//! From those, a burn-in `M` bounding the distance to stationarity by
//! `epsilon` and a sample size `N` meeting precision `r` at confidence `s`
//! are computed, and the trajectory is extended until `M + N` fits.

use std::time::Instant;

use crate::error::{Degeneracy, EstimateError};
use crate::model::PbnModel;
use crate::result::EstimateResult;
use crate::sim::{BitSeq, BitSource, ChainSet, MetaProperty, ModelSource, SimOptions, TransitionCounts, WorkerPool};
use crate::stats::inv_norm_cdf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateParams {
    pub alpha: f64,
    pub beta: f64,
    pub degenerate: Option<Degeneracy>,
}

impl TwoStateParams {
    /// Parameters given directly; flagged degenerate on the singular
    /// branches of the burn-in and sample-size formulas.
    pub fn new(alpha: f64, beta: f64) -> Self {
        let degenerate = if alpha == 0.0 && beta == 0.0 {
            // no transitions at all; the caller knows which state it sat in
            Some(Degeneracy::NeverInterest)
        } else if alpha == 0.0 {
            Some(Degeneracy::NeverInterest)
        } else if beta == 0.0 {
            Some(Degeneracy::AlwaysInterest)
        } else if alpha == 1.0 && beta == 1.0 {
            Some(Degeneracy::Periodic)
        } else {
            None
        };
        Self {
            alpha,
            beta,
            degenerate,
        }
    }

    /// Maximum-likelihood estimates from transition counts.
    pub fn from_counts(c: &TransitionCounts) -> Self {
        let alpha = if c.from_zero > 0 {
            c.zero_to_one as f64 / c.from_zero as f64
        } else {
            0.0
        };
        let beta = if c.from_one > 0 {
            c.one_to_zero as f64 / c.from_one as f64
        } else {
            0.0
        };
        let mut params = Self::new(alpha, beta);
        if c.from_one == 0 {
            params.degenerate = Some(Degeneracy::NeverInterest);
        } else if c.from_zero == 0 {
            params.degenerate = Some(Degeneracy::AlwaysInterest);
        }
        params
    }

    fn require_regular(&self) -> Result<(), EstimateError> {
        match self.degenerate {
            Some(kind) => Err(EstimateError::Degenerate { kind, steps: 0 }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateSettings {
    /// Initial burn-in.
    pub m0: u64,
    /// Initial sample size.
    pub n0: u64,
    /// Bound on the distance to the stationary distribution after burn-in.
    pub epsilon: f64,
    /// Half-width of the required accuracy, `r`.
    pub precision: f64,
    /// Confidence level, `s`.
    pub confidence: f64,
}

impl Default for TwoStateSettings {
    fn default() -> Self {
        Self {
            m0: 100,
            n0: 10_000,
            epsilon: 1e-10,
            precision: 1e-4,
            confidence: 0.95,
        }
    }
}

impl TwoStateSettings {
    pub fn check(&self) -> Result<(), EstimateError> {
        let bad = |m: String| Err(EstimateError::Settings(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} outside (0, 1)", self.epsilon));
        }
        if !(self.precision > 0.0 && self.precision < 1.0) {
            return bad(format!("precision {} outside (0, 1)", self.precision));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad(format!("confidence {} outside (0, 1)", self.confidence));
        }
        if self.n0 < 2 {
            return bad(format!("initial sample size {} below 2", self.n0));
        }
        Ok(())
    }
}

/// Transition-count estimates of `alpha` and `beta` over a whole sequence.
pub fn estimate_alpha_beta(bits: &BitSeq) -> TwoStateParams {
    TwoStateParams::from_counts(&bits.transitions(0..bits.len()))
}

/// Burn-in `M = ceil(ln(eps (a + b) / max(a, b)) / ln |1 - a - b|)`.
///
/// Returns 1 when `a + b = 1` (the chain forgets its start in one step).
pub fn burn_in_m(params: &TwoStateParams, epsilon: f64) -> Result<u64, EstimateError> {
    params.require_regular()?;
    let (a, b) = (params.alpha, params.beta);
    let lambda = (1.0 - a - b).abs();
    if lambda == 0.0 {
        return Ok(1);
    }
    let m = ((epsilon * (a + b) / a.max(b)).ln() / lambda.ln()).ceil();
    Ok(if m >= 1.0 { m as u64 } else { 1 })
}

/// Sample size `N = ceil(a b (2 - a - b) / (a + b)^3 * (z / r)^2)` with
/// `z` the `(1 + s) / 2` normal quantile.
pub fn sample_size_n(params: &TwoStateParams, r: f64, s: f64) -> Result<u64, EstimateError> {
    params.require_regular()?;
    let (a, b) = (params.alpha, params.beta);
    let z = inv_norm_cdf(0.5 * (1.0 + s)).map_err(|e| EstimateError::Settings(e.to_string()))?;
    let n = a * b * (2.0 - a - b) / (a + b).powi(3) * (z / r).powi(2);
    Ok(n.ceil() as u64)
}

/// Runs the iterative estimation on chain 0 of `source`.
pub fn estimate_from_source<S: BitSource>(
    source: &mut S,
    settings: &TwoStateSettings,
) -> Result<EstimateResult, EstimateError> {
    settings.check()?;
    let started = Instant::now();
    let mut m = settings.m0;
    let mut n = settings.n0;
    let mut l = m + n;
    source.extend_to(l)?;
    let mut extensions = 0u32;
    loop {
        if m + n > l {
            source.extend_to(m + n)?;
            l = m + n;
            extensions += 1;
        }
        let params = TwoStateParams::from_counts(&source.bits(0).transitions(l - n..l));
        if let Some(kind) = params.degenerate {
            // Double the trajectory and look at all of it.
            match source.extend_to(2 * l) {
                Ok(()) => {}
                Err(EstimateError::CapExceeded { .. }) => {
                    return Err(EstimateError::Degenerate { kind, steps: l })
                }
                Err(e) => return Err(e),
            }
            l *= 2;
            n = l;
            m = 0;
            extensions += 1;
            continue;
        }
        m = burn_in_m(&params, settings.epsilon)?;
        n = sample_size_n(&params, settings.precision, settings.confidence)?;
        if m + n <= l {
            break;
        }
    }
    let ones = source.bits(0).count_ones(l - n..l);
    Ok(EstimateResult {
        estimate: ones as f64 / n as f64,
        ci: None,
        sample_size: m + n,
        burn_in: m,
        simulated_steps: source.total_steps(),
        required_sample_size: Some(n),
        extensions,
        batching: None,
        flag: None,
        wall_time: started.elapsed(),
    })
}

/// Sequential two-state estimate of the steady-state probability of
/// `property` on one simulated chain (stream 0 of `seed`).
pub fn run_sequential(
    model: &PbnModel,
    property: &MetaProperty,
    settings: &TwoStateSettings,
    seed: u64,
    options: &SimOptions,
) -> Result<EstimateResult, EstimateError> {
    let started = Instant::now();
    property
        .check(model.n)
        .map_err(|e| EstimateError::Settings(e.to_string()))?;
    settings.check()?;
    if property.is_trivial() {
        return Ok(EstimateResult::trivial(
            1.0,
            Degeneracy::AlwaysInterest,
            started.elapsed(),
        ));
    }
    let pool = WorkerPool::sequential();
    let set = ChainSet::new(model, vec![property.clone()], 1, seed, options);
    let mut source = ModelSource::new(model, set, 0, &pool, options.cap);
    let mut result = estimate_from_source(&mut source, settings)?;
    result.wall_time = started.elapsed();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{FixedSource, SyntheticKind, SyntheticSource};

    fn bits(v: &[u8]) -> BitSeq {
        BitSeq::from_bits(v.iter().map(|&b| b == 1))
    }

    #[test]
    fn alpha_beta_hand_counts() {
        let p = estimate_alpha_beta(&bits(&[0, 0, 1, 1, 0]));
        assert_eq!((p.alpha, p.beta, p.degenerate), (0.5, 0.5, None));
        let p = estimate_alpha_beta(&bits(&[0, 0, 0, 0]));
        assert_eq!(p.alpha, 0.0);
        assert_eq!(p.degenerate, Some(Degeneracy::NeverInterest));
        let p = estimate_alpha_beta(&bits(&[0, 1, 0, 1, 0, 1]));
        assert_eq!((p.alpha, p.beta), (1.0, 1.0));
        assert_eq!(p.degenerate, Some(Degeneracy::Periodic));
        let p = estimate_alpha_beta(&bits(&[1, 1, 1]));
        assert_eq!(p.degenerate, Some(Degeneracy::AlwaysInterest));
    }

    #[test]
    fn burn_in_reference_value() {
        // ln(2e-10) / ln(0.8) = 100.08..., frozen from a 50-digit evaluation
        assert_eq!(burn_in_m(&TwoStateParams::new(0.1, 0.1), 1e-10).unwrap(), 101);
        assert_eq!(burn_in_m(&TwoStateParams::new(0.5, 0.5), 1e-10).unwrap(), 1);
        assert_eq!(burn_in_m(&TwoStateParams::new(0.3, 0.7), 1e-10).unwrap(), 1);
    }

    #[test]
    fn burn_in_monotone_in_epsilon() {
        for &(a, b) in &[(0.1, 0.1), (0.02, 0.3), (0.7, 0.6), (0.9, 0.05)] {
            let p = TwoStateParams::new(a, b);
            let ms: Vec<u64> = (4..=12)
                .map(|k| burn_in_m(&p, 10f64.powi(-k)).unwrap())
                .collect();
            assert!(ms.windows(2).all(|w| w[0] <= w[1]), "{ms:?}");
        }
    }

    #[test]
    fn sample_size_reference_value() {
        // 2.25 * 1.95996398454005^2 / 1e-4 = 86432.82..., frozen from a 50-digit evaluation
        assert_eq!(
            sample_size_n(&TwoStateParams::new(0.1, 0.1), 0.01, 0.95).unwrap(),
            86433
        );
        let big = sample_size_n(&TwoStateParams::new(0.1, 0.1), 0.001, 0.95).unwrap();
        let ratio = 86433.0 / big as f64;
        assert!((0.00999..=0.01001).contains(&ratio), "{ratio}");
    }

    #[test]
    fn singular_branches_are_rejected() {
        for (a, b) in [(0.0, 0.0), (0.0, 0.4), (0.4, 0.0), (1.0, 1.0)] {
            let p = TwoStateParams::new(a, b);
            assert!(matches!(
                sample_size_n(&p, 0.01, 0.95),
                Err(EstimateError::Degenerate { .. })
            ));
            assert!(matches!(burn_in_m(&p, 1e-10), Err(EstimateError::Degenerate { .. })));
        }
    }

    #[test]
    fn estimate_is_mean_of_last_n_bits() {
        let mut src = SyntheticSource::new(SyntheticKind::Markov { alpha: 0.3, beta: 0.2 }, 1, 4);
        let settings = TwoStateSettings {
            precision: 0.01,
            ..Default::default()
        };
        let r = estimate_from_source(&mut src, &settings).unwrap();
        let n = r.required_sample_size.unwrap();
        let l = src.len();
        assert!(r.sample_size <= l);
        let mean = src.bits(0).count_ones(l - n..l) as f64 / n as f64;
        assert_eq!(mean.to_bits(), r.estimate.to_bits());
        assert!((r.estimate - 0.6).abs() < 0.03);
    }

    #[test]
    fn markov_parameters_recovered() {
        let (alpha, beta) = (0.2, 0.05);
        let mut hits = 0;
        for seed in 0..100 {
            let mut src = SyntheticSource::new(SyntheticKind::Markov { alpha, beta }, 1, seed);
            src.extend_to(20_000).unwrap();
            let c = src.bits(0).transitions(0..20_000);
            let p = TwoStateParams::from_counts(&c);
            let bound = 3.0 * (alpha * (1.0 - alpha) / c.from_zero as f64).sqrt();
            if (p.alpha - alpha).abs() < bound {
                hits += 1;
            }
        }
        assert!(hits >= 99, "{hits}");
    }

    #[test]
    fn constant_stream_reports_degenerate() {
        let mut src = FixedSource::new(BitSeq::from_bits(std::iter::repeat(false).take(50_000)));
        let err = estimate_from_source(&mut src, &TwoStateSettings::default()).unwrap_err();
        assert!(matches!(
            err,
            EstimateError::Degenerate {
                kind: Degeneracy::NeverInterest,
                ..
            }
        ));
    }
}
