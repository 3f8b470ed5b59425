//! Gelman & Rubin potential scale reduction factor and the doubling loop
//! that produces converged chains.

use crate::error::{Degeneracy, EstimateError, StatsError};
use crate::model::PbnModel;
use crate::sim::{ChainSet, MetaProperty, SimOptions, WorkerPool};

pub const DEFAULT_THRESHOLD: f64 = 1.1;
pub const DEFAULT_PSI0: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsrfReport {
    /// Between-chain variance.
    pub b: f64,
    /// Mean within-chain variance.
    pub w: f64,
    pub sigma2_hat: f64,
    pub r_hat: f64,
    pub psi: u64,
    pub omega: u64,
}

/// Per-chain mean and sample variance (divisor `psi - 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSummary {
    pub mean: f64,
    pub variance: f64,
}

fn combine(chains: &[ChainSummary], psi: u64) -> Result<PsrfReport, StatsError> {
    let omega = chains.len();
    if omega < 2 {
        return Err(StatsError::TooShort {
            needed: 2,
            got: omega,
        });
    }
    if psi < 2 {
        return Err(StatsError::TooShort {
            needed: 2,
            got: psi as usize,
        });
    }
    let (w_f, psi_f) = (omega as f64, psi as f64);
    let mu = chains.iter().map(|c| c.mean).sum::<f64>() / w_f;
    let b = psi_f / (w_f - 1.0) * chains.iter().map(|c| (c.mean - mu).powi(2)).sum::<f64>();
    let w = chains.iter().map(|c| c.variance).sum::<f64>() / w_f;
    if !(w > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let sigma2_hat = (1.0 - 1.0 / psi_f) * w + b / psi_f;
    Ok(PsrfReport {
        b,
        w,
        sigma2_hat,
        r_hat: (sigma2_hat / w).sqrt(),
        psi,
        omega: omega as u64,
    })
}

/// PSRF of `omega` equally long windows.
pub fn psrf(windows: &[&[f64]]) -> Result<PsrfReport, StatsError> {
    let psi = windows.first().map_or(0, |w| w.len());
    if windows.iter().any(|w| w.len() != psi) {
        return Err(StatsError::Domain(psi as f64));
    }
    let chains: Vec<ChainSummary> = windows
        .iter()
        .map(|w| {
            let n = w.len() as f64;
            let mean = w.iter().sum::<f64>() / n;
            let ss: f64 = w.iter().map(|x| (x - mean).powi(2)).sum();
            ChainSummary {
                mean,
                variance: ss / (n - 1.0),
            }
        })
        .collect();
    combine(&chains, psi as u64)
}

/// PSRF of 0-1 windows given by their counts of ones.
pub fn psrf_from_ones(ones: &[u64], psi: u64) -> Result<PsrfReport, StatsError> {
    let n = psi as f64;
    let chains: Vec<ChainSummary> = ones
        .iter()
        .map(|&k| {
            let mean = k as f64 / n;
            ChainSummary {
                mean,
                variance: n * mean * (1.0 - mean) / (n - 1.0),
            }
        })
        .collect();
    combine(&chains, psi)
}

/// Chains whose burn-in has been judged sufficient.
#[derive(Debug, Clone)]
pub struct ConvergedChains {
    /// Every chain has length `2 * set.psi`.
    pub set: ChainSet,
    /// Largest R-hat over the properties at each doubling.
    pub trace: Vec<f64>,
}

/// Largest R-hat over the properties on window `[psi, 2 psi)`. Properties
/// whose windows hold one and the same constant in every chain carry no
/// information and are left out, unless nothing else is left.
fn max_r_hat(set: &ChainSet, psi: u64) -> Result<f64, Degeneracy> {
    let mut worst: Option<f64> = None;
    let mut constant = None;
    for k in 0..set.properties().len() {
        let ones: Vec<u64> = set
            .chains()
            .iter()
            .map(|c| c.history(k).count_ones(psi..2 * psi))
            .collect();
        if ones.iter().all(|&o| o == 0) {
            constant.get_or_insert(Degeneracy::NeverInterest);
            continue;
        }
        if ones.iter().all(|&o| o == psi) {
            constant.get_or_insert(Degeneracy::AlwaysInterest);
            continue;
        }
        let r = match psrf_from_ones(&ones, psi) {
            Ok(rep) => rep.r_hat,
            Err(_) => f64::INFINITY,
        };
        worst = Some(worst.map_or(r, |w: f64| w.max(r)));
    }
    match (worst, constant) {
        (Some(r), _) => Ok(r),
        (None, Some(kind)) => Err(kind),
        (None, None) => Ok(f64::INFINITY),
    }
}

/// Runs `omega` chains, doubling the window `psi` from `psi0` until the
/// PSRF of every registered property over the second half is finite and
/// below `threshold`. The returned set has `psi` set to the burn-in.
#[allow(clippy::too_many_arguments)]
pub fn generate_converged_chains(
    model: &PbnModel,
    properties: &[MetaProperty],
    omega: usize,
    psi0: u64,
    threshold: f64,
    seed: u64,
    pool: &WorkerPool,
    options: &SimOptions,
) -> Result<ConvergedChains, EstimateError> {
    if omega < 2 {
        return Err(EstimateError::Settings(format!("{omega} chains; at least 2 needed")));
    }
    if psi0 < 2 {
        return Err(EstimateError::Settings(format!("initial window {psi0} below 2")));
    }
    if !(threshold > 1.0) {
        return Err(EstimateError::Settings(format!("threshold {threshold} must exceed 1")));
    }
    if properties.is_empty() {
        return Err(EstimateError::Settings("no property to monitor".into()));
    }
    let mut set = ChainSet::new(model, properties.to_vec(), omega, seed, options);
    let mut psi = psi0;
    let mut trace = Vec::new();
    let mut constant = None;
    loop {
        let requested = (2 * psi).saturating_mul(omega as u64);
        if requested > options.cap {
            return Err(match constant {
                Some(kind) => EstimateError::Degenerate {
                    kind,
                    steps: set.total_steps(),
                },
                None => EstimateError::NotConverged { trace },
            });
        }
        set.extend_to(model, 2 * psi, pool);
        match max_r_hat(&set, psi) {
            Ok(r) => {
                constant = None;
                trace.push(r);
                if r.is_finite() && r < threshold {
                    set.psi = psi;
                    return Ok(ConvergedChains { set, trace });
                }
            }
            Err(kind) => constant = Some(kind),
        }
        psi *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{BitSource, SyntheticKind, SyntheticSource};
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let a = [0.0, 1.0, 0.0, 1.0];
        let b = [1.0, 0.0, 1.0, 0.0];
        let r = psrf(&[&a, &b]).unwrap();
        assert!(r.b.abs() < 1e-12);
        assert!((r.w - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.sigma2_hat - 0.25).abs() < 1e-12);
        assert!((r.r_hat - 0.75f64.sqrt()).abs() < 1e-12);
        assert_eq!((r.psi, r.omega), (4, 2));
        let bits = psrf_from_ones(&[2, 2], 4).unwrap();
        assert!((bits.r_hat - r.r_hat).abs() < 1e-12);
    }

    #[test]
    fn identical_windows_have_no_between_variance() {
        let a = [0.3, 0.9, 0.1, 0.5, 0.2];
        assert!(psrf(&[&a, &a, &a]).unwrap().b.abs() < 1e-12);
    }

    #[test]
    fn constant_windows_rejected() {
        let a = [1.0; 6];
        assert_eq!(psrf(&[&a, &a]), Err(StatsError::ZeroVariance));
        assert!(psrf(&[&a[..]]).is_err());
    }

    proptest! {
        #[test]
        fn sigma2_is_convex_combination(
            data in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 2..6)
        ) {
            let windows: Vec<&[f64]> = data.iter().map(|w| w.as_slice()).collect();
            if let Ok(r) = psrf(&windows) {
                let psi = 6.0;
                let expect = (1.0 - 1.0 / psi) * r.w + r.b / psi;
                prop_assert!((r.sigma2_hat - expect).abs() <= 1e-12 * expect.abs().max(1.0));
                prop_assert!(r.b >= 0.0 && r.w >= 0.0 && r.r_hat >= 0.0);
            }
        }
    }

    #[test]
    fn r_hat_approaches_one() {
        let mut better = 0;
        for seed in 0..20 {
            let mut src = SyntheticSource::new(SyntheticKind::Markov { alpha: 0.1, beta: 0.2 }, 4, seed);
            src.extend_to(1 << 17).unwrap();
            let r_at = |psi: u64| {
                let ones: Vec<u64> = (0..4).map(|c| src.bits(c).count_ones(psi..2 * psi)).collect();
                psrf_from_ones(&ones, psi).unwrap().r_hat
            };
            if (r_at(1 << 16) - 1.0).abs() < (r_at(1 << 8) - 1.0).abs() {
                better += 1;
            }
        }
        assert!(better >= 18, "{better}");
    }
}
