//! Multi-chain versions of the two estimators.
//!
//! Chains are first run until the Gelman & Rubin diagnostic accepts their
//! burn-in; their second halves are then pooled (chain-major) into one
//! sample that is extended, in parallel, until the estimator is satisfied.

use std::ops::Range;
use std::time::{Duration, Instant};

use crate::error::{Degeneracy, EstimateError};
use crate::gelman_rubin::{generate_converged_chains, DEFAULT_PSI0, DEFAULT_THRESHOLD};
use crate::model::PbnModel;
use crate::result::EstimateResult;
use crate::sim::{ChainSet, MetaProperty, ModelSource, SimOptions, TransitionCounts, WorkerPool};
use crate::skart::{estimate_multi_chain, SkartSettings};
use crate::two_state::{burn_in_m, sample_size_n, TwoStateParams, TwoStateSettings};

/// How the chains are run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub omega: usize,
    /// Initial diagnostic window.
    pub psi0: u64,
    /// R-hat below which the chains count as converged.
    pub threshold: f64,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
    pub sim: SimOptions,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            omega: 4,
            psi0: DEFAULT_PSI0,
            threshold: DEFAULT_THRESHOLD,
            workers: 1,
            sim: SimOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropertyOutcome {
    pub name: String,
    pub result: Result<EstimateResult, EstimateError>,
}

#[derive(Debug, Clone)]
pub struct MultiPropertyResult {
    pub properties: Vec<PropertyOutcome>,
    /// Size of the pooled sample, `omega * n`, counted once for all properties.
    pub total_sample_size: u64,
    pub extensions: u32,
    /// Final per-chain burn-in.
    pub burn_in: u64,
    pub simulated_steps: u64,
    /// Largest R-hat at each doubling of the convergence loop.
    pub r_hat_trace: Vec<f64>,
    pub wall_time: Duration,
}

fn check_properties(model: &PbnModel, properties: &[MetaProperty]) -> Result<(), EstimateError> {
    if properties.is_empty() {
        return Err(EstimateError::Settings("no property given".into()));
    }
    for p in properties {
        p.check(model.n)
            .map_err(|e| EstimateError::Settings(e.to_string()))?;
    }
    Ok(())
}

fn grow(
    model: &PbnModel,
    set: &mut ChainSet,
    len: u64,
    pool: &WorkerPool,
    cap: u64,
) -> Result<(), EstimateError> {
    let requested = len.saturating_mul(set.omega() as u64);
    if requested > cap {
        return Err(EstimateError::CapExceeded { cap, requested });
    }
    set.extend_to(model, len, pool);
    Ok(())
}

fn pooled_counts(set: &ChainSet, property: usize, r: Range<u64>) -> TransitionCounts {
    let mut total = TransitionCounts::default();
    for c in set.chains() {
        total += c.history(property).transitions(r.clone());
    }
    total
}

fn pooled_ones(set: &ChainSet, property: usize, r: Range<u64>) -> u64 {
    set.chains()
        .iter()
        .map(|c| c.history(property).count_ones(r.clone()))
        .sum()
}

/// Per-property state of the pooled estimation.
#[derive(Debug, Clone, Copy)]
enum Need {
    Sample { n: u64, params: TwoStateParams },
    Degenerate(Degeneracy),
}

/// Multi-chain two-state estimate of every property in `properties` from
/// one shared set of chains.
pub fn parallel_two_state(
    model: &PbnModel,
    properties: &[MetaProperty],
    settings: &TwoStateSettings,
    config: &ChainConfig,
    seed: u64,
) -> Result<MultiPropertyResult, EstimateError> {
    let started = Instant::now();
    check_properties(model, properties)?;
    settings.check()?;
    if config.omega < 2 {
        return Err(EstimateError::Settings("at least 2 chains needed".into()));
    }
    let omega = config.omega as u64;
    let cap = config.sim.cap;

    let active: Vec<usize> = (0..properties.len())
        .filter(|&i| !properties[i].is_trivial())
        .collect();
    let mut outcomes: Vec<Option<Result<EstimateResult, EstimateError>>> = properties
        .iter()
        .map(|p| {
            p.is_trivial().then(|| {
                Ok(EstimateResult::trivial(
                    1.0,
                    Degeneracy::AlwaysInterest,
                    Duration::ZERO,
                ))
            })
        })
        .collect();
    let finish = |outcomes: Vec<Option<Result<EstimateResult, EstimateError>>>,
                  total: u64,
                  extensions: u32,
                  burn_in: u64,
                  steps: u64,
                  trace: Vec<f64>| MultiPropertyResult {
        properties: properties
            .iter()
            .zip(outcomes)
            .map(|(p, o)| PropertyOutcome {
                name: p.name.clone(),
                result: o.expect("every property decided"),
            })
            .collect(),
        total_sample_size: total,
        extensions,
        burn_in,
        simulated_steps: steps,
        r_hat_trace: trace,
        wall_time: started.elapsed(),
    };
    if active.is_empty() {
        return Ok(finish(outcomes, 0, 0, 0, 0, Vec::new()));
    }

    let pool = WorkerPool::new(config.workers);
    let monitored: Vec<MetaProperty> = active.iter().map(|&i| properties[i].clone()).collect();
    let converged = match generate_converged_chains(
        model,
        &monitored,
        config.omega,
        config.psi0,
        config.threshold,
        seed,
        &pool,
        &config.sim,
    ) {
        Ok(c) => c,
        Err(e @ EstimateError::Degenerate { .. }) => {
            for &i in &active {
                outcomes[i] = Some(Err(e.clone()));
            }
            return Ok(finish(outcomes, 0, 0, 0, 0, Vec::new()));
        }
        Err(e) => return Err(e),
    };
    let trace = converged.trace;
    let mut set = converged.set;
    let mut psi = set.psi;
    // The second halves form the first pooled sample.
    let mut start = psi;
    let mut n = psi;
    let mut extensions = 0u32;
    let mut needs: Vec<Need>;

    loop {
        loop {
            needs = (0..active.len())
                .map(|k| {
                    let params = TwoStateParams::from_counts(&pooled_counts(&set, k, start..start + n));
                    match params.degenerate {
                        Some(kind) => Ok(Need::Degenerate(kind)),
                        None => sample_size_n(&params, settings.precision, settings.confidence)
                            .map(|n| Need::Sample { n, params }),
                    }
                })
                .collect::<Result<_, _>>()?;
            let pooled = omega * n;
            let mut informative = false;
            let mut smallest_unmet: Option<u64> = None;
            for need in &needs {
                if let Need::Sample { n: required, .. } = *need {
                    informative = true;
                    if required > pooled {
                        smallest_unmet = Some(smallest_unmet.map_or(required, |m| m.min(required)));
                    }
                }
            }
            let extend_by = if !informative {
                n
            } else if let Some(target) = smallest_unmet {
                (target - pooled).div_ceil(omega)
            } else {
                break;
            };
            match grow(model, &mut set, start + n + extend_by, &pool, cap) {
                Ok(()) => {}
                Err(EstimateError::CapExceeded { .. }) if !informative => break,
                Err(e) => return Err(e),
            }
            n += extend_by;
            extensions += 1;
        }

        // Burn-in re-check.
        let mut max_m = 0;
        for need in &needs {
            if let Need::Sample { params, .. } = need {
                max_m = max_m.max(burn_in_m(params, settings.epsilon)?);
            }
        }
        if max_m <= psi {
            break;
        }
        let drop = max_m - psi;
        start = max_m;
        psi = max_m;
        if n >= drop + 2 {
            n -= drop;
        } else {
            n = psi;
            grow(model, &mut set, start + n, &pool, cap)?;
            extensions += 1;
        }
    }

    let steps = set.total_steps();
    let pooled = omega * n;
    for (k, &i) in active.iter().enumerate() {
        outcomes[i] = Some(match needs[k] {
            Need::Degenerate(kind) => Err(EstimateError::Degenerate { kind, steps }),
            Need::Sample { n: required, params } => {
                debug_assert!(burn_in_m(&params, settings.epsilon).map_or(true, |m| m <= psi));
                let ones = pooled_ones(&set, k, start..start + n);
                Ok(EstimateResult {
                    estimate: ones as f64 / pooled as f64,
                    ci: None,
                    sample_size: pooled,
                    burn_in: psi,
                    simulated_steps: steps,
                    required_sample_size: Some(required),
                    extensions,
                    batching: None,
                    flag: None,
                    wall_time: Duration::ZERO,
                })
            }
        });
    }
    let mut result = finish(outcomes, pooled, extensions, psi, steps, trace);
    for o in &mut result.properties {
        if let Ok(r) = &mut o.result {
            r.wall_time = result.wall_time;
        }
    }
    Ok(result)
}

/// Multi-chain Skart estimate of `property`. With a single chain no
/// convergence diagnostic is run and nothing is skipped.
pub fn parallel_skart(
    model: &PbnModel,
    property: &MetaProperty,
    settings: &SkartSettings,
    config: &ChainConfig,
    seed: u64,
) -> Result<EstimateResult, EstimateError> {
    let started = Instant::now();
    check_properties(model, std::slice::from_ref(property))?;
    settings.check()?;
    if config.omega == 0 {
        return Err(EstimateError::Settings("at least 1 chain needed".into()));
    }
    if property.is_trivial() {
        return Ok(EstimateResult::trivial(
            1.0,
            Degeneracy::AlwaysInterest,
            started.elapsed(),
        ));
    }
    let pool = WorkerPool::new(config.workers);
    let set = if config.omega == 1 {
        ChainSet::new(model, vec![property.clone()], 1, seed, &config.sim)
    } else {
        generate_converged_chains(
            model,
            std::slice::from_ref(property),
            config.omega,
            config.psi0,
            config.threshold,
            seed,
            &pool,
            &config.sim,
        )?
        .set
    };
    let psi = set.psi;
    let mut source = ModelSource::new(model, set, 0, &pool, config.sim.cap);
    let mut result = estimate_multi_chain(&mut source, settings, psi)?;
    result.wall_time = started.elapsed();
    Ok(result)
}

/// `(t_seq / t_par, t_seq / t_par * size_par / size_seq)`.
pub fn speedup_metrics(
    t_seq: f64,
    t_par: f64,
    size_seq: f64,
    size_par: f64,
) -> Result<(f64, f64), EstimateError> {
    for (name, v) in [
        ("sequential time", t_seq),
        ("parallel time", t_par),
        ("sequential size", size_seq),
        ("parallel size", size_par),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(EstimateError::Settings(format!("{name} {v} must be positive")));
        }
    }
    let speedup = t_seq / t_par;
    Ok((speedup, speedup * size_par / size_seq))
}
