//! Run records for the `pbn-steady` command line tool: what was run, with
//! which settings, and what came out, in JSON or CSV.

use std::fmt;
use std::time::Instant;

use pbn_steady::model::{serialize_model, PbnModel};
use pbn_steady::parallel::{parallel_skart, parallel_two_state, speedup_metrics, ChainConfig};
use pbn_steady::sim::{MetaProperty, PerturbationMode, SimOptions, DEFAULT_STEP_CAP};
use pbn_steady::skart::{skart_run, SkartSettings};
use pbn_steady::two_state::{run_sequential, TwoStateSettings};
use pbn_steady::{EstimateError, EstimateResult};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TwoState,
    Skart,
    ParTwoState,
    ParSkart,
}

impl Method {
    pub fn is_parallel(self) -> bool {
        matches!(self, Method::ParTwoState | Method::ParSkart)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::TwoState => "two-state",
            Method::Skart => "skart",
            Method::ParTwoState => "par-two-state",
            Method::ParSkart => "par-skart",
        })
    }
}

/// Everything needed to reproduce a run, apart from the model and the
/// properties themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub method: Method,
    pub precision: f64,
    pub confidence: f64,
    pub epsilon: f64,
    pub h_star: f64,
    pub alpha: f64,
    pub omega: usize,
    pub psi0: u64,
    pub rhat_threshold: f64,
    pub seed: u64,
    pub cap: u64,
    pub perturbation_mode: PerturbationMode,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            method: Method::TwoState,
            precision: 1e-4,
            confidence: 0.95,
            epsilon: 1e-10,
            h_star: 1e-4,
            alpha: 0.05,
            omega: 4,
            psi0: 1000,
            rhat_threshold: 1.1,
            seed: 0,
            cap: DEFAULT_STEP_CAP,
            perturbation_mode: PerturbationMode::PerNode,
        }
    }
}

impl RunSettings {
    fn two_state(&self) -> TwoStateSettings {
        TwoStateSettings {
            precision: self.precision,
            confidence: self.confidence,
            epsilon: self.epsilon,
            ..Default::default()
        }
    }

    fn skart(&self) -> SkartSettings {
        SkartSettings {
            h_star: self.h_star,
            alpha_conf: self.alpha,
            ..Default::default()
        }
    }

    fn sim(&self) -> SimOptions {
        SimOptions {
            perturbation: self.perturbation_mode,
            cap: self.cap,
            ..Default::default()
        }
    }

    fn chains(&self, workers: usize) -> ChainConfig {
        ChainConfig {
            omega: self.omega,
            psi0: self.psi0,
            threshold: self.rhat_threshold,
            workers,
            sim: self.sim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Degenerate,
    NotConverged,
    CapExceeded,
    InvalidSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub name: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<EstimateResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PropertyRecord {
    fn new(name: &str, outcome: Result<EstimateResult, EstimateError>) -> Self {
        let (status, result, error) = match outcome {
            Ok(r) => (Status::Ok, Some(r), None),
            Err(e) => {
                let status = match e {
                    EstimateError::Degenerate { .. } => Status::Degenerate,
                    EstimateError::NotConverged { .. } => Status::NotConverged,
                    EstimateError::CapExceeded { .. } => Status::CapExceeded,
                    EstimateError::Settings(_) => Status::InvalidSettings,
                };
                (status, None, Some(e.to_string()))
            }
        };
        Self {
            name: name.to_string(),
            status,
            result,
            error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Hex SHA-256 of the canonical serialisation of the model.
    pub model_hash: String,
    pub model_path: Option<String>,
    pub nodes: usize,
    pub method: Method,
    pub settings: RunSettings,
    pub properties: Vec<PropertyRecord>,
    /// Chains run; 1 for the sequential methods.
    pub omega: usize,
    pub workers: usize,
    pub seed: u64,
    /// Pooled sample size shared by all properties (parallel two-state only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_sample_size: Option<u64>,
    pub wall_time: f64,
}

pub fn model_hash(model: &PbnModel) -> String {
    let digest = Sha256::digest(serialize_model(model).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `settings.method` on every property. The sequential methods and
/// parallel Skart handle one property at a time, all from the same seed.
pub fn run(
    model: &PbnModel,
    model_path: Option<String>,
    properties: &[MetaProperty],
    settings: &RunSettings,
    workers: usize,
) -> RunRecord {
    let started = Instant::now();
    let mut shared = None;
    let seed = settings.seed;
    let records = match settings.method {
        Method::ParTwoState => {
            match parallel_two_state(model, properties, &settings.two_state(), &settings.chains(workers), seed) {
                Ok(r) => {
                    shared = Some(r.total_sample_size);
                    r.properties
                        .into_iter()
                        .map(|o| PropertyRecord::new(&o.name, o.result))
                        .collect()
                }
                Err(e) => properties
                    .iter()
                    .map(|p| PropertyRecord::new(&p.name, Err(e.clone())))
                    .collect(),
            }
        }
        method => properties
            .iter()
            .map(|p| {
                let outcome = match method {
                    Method::TwoState => run_sequential(model, p, &settings.two_state(), seed, &settings.sim()),
                    Method::Skart => skart_run(model, p, &settings.skart(), seed, &settings.sim()),
                    _ => parallel_skart(model, p, &settings.skart(), &settings.chains(workers), seed),
                };
                PropertyRecord::new(&p.name, outcome)
            })
            .collect(),
    };
    RunRecord {
        model_hash: model_hash(model),
        model_path,
        nodes: model.n,
        method: settings.method,
        settings: settings.clone(),
        properties: records,
        omega: if settings.method.is_parallel() { settings.omega } else { 1 },
        workers,
        seed,
        shared_sample_size: shared,
        wall_time: started.elapsed().as_secs_f64(),
    }
}

/// Process exit code for a finished run: 4 if any property hit the cap or
/// did not converge, else 3 if any was degenerate, else 0.
pub fn exit_code(record: &RunRecord) -> i32 {
    let has = |s: Status| record.properties.iter().any(|p| p.status == s);
    if has(Status::InvalidSettings) {
        2
    } else if has(Status::NotConverged) || has(Status::CapExceeded) {
        4
    } else if has(Status::Degenerate) {
        3
    } else {
        0
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn to_json(record: &RunRecord) -> String {
    let mut v = serde_json::to_value(record).expect("records serialise");
    round_value(&mut v);
    serde_json::to_string_pretty(&v).expect("values serialise")
}

pub fn from_json(text: &str) -> serde_json::Result<RunRecord> {
    serde_json::from_str(text)
}

pub const CSV_HEADER: [&str; 17] = [
    "model_hash",
    "method",
    "omega",
    "workers",
    "seed",
    "property",
    "status",
    "estimate",
    "ci_low",
    "ci_high",
    "sample_size",
    "burn_in",
    "simulated_steps",
    "required_sample_size",
    "extensions",
    "flag",
    "wall_time",
];

fn num(x: f64) -> String {
    round_sig(x).to_string()
}

/// One row per property, numbers rounded as in the JSON form.
pub fn to_csv(record: &RunRecord) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for p in &record.properties {
        let r = p.result.as_ref();
        let opt = |f: &dyn Fn(&EstimateResult) -> Option<String>| r.and_then(f).unwrap_or_default();
        let status = serde_json::to_value(p.status).expect("status serialises");
        let row = [
            record.model_hash.clone(),
            record.method.to_string(),
            record.omega.to_string(),
            record.workers.to_string(),
            record.seed.to_string(),
            p.name.clone(),
            status.as_str().unwrap_or_default().to_string(),
            opt(&|r| Some(num(r.estimate))),
            opt(&|r| r.ci.map(|c| num(c.low))),
            opt(&|r| r.ci.map(|c| num(c.high))),
            opt(&|r| Some(r.sample_size.to_string())),
            opt(&|r| Some(r.burn_in.to_string())),
            opt(&|r| Some(r.simulated_steps.to_string())),
            opt(&|r| r.required_sample_size.map(|n| n.to_string())),
            opt(&|r| Some(r.extensions.to_string())),
            opt(&|r| r.flag.map(|f| serde_json::to_value(f).unwrap().as_str().unwrap().to_string())),
            opt(&|r| Some(num(r.wall_time.as_secs_f64()))),
        ];
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// One row of a comparison between two runs of the same property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub property: String,
    pub first: String,
    pub second: String,
    pub estimate_first: f64,
    pub estimate_second: f64,
    pub difference: f64,
    /// The difference exceeds twice the precision of the first run.
    pub exceeds_2r: bool,
    pub speedup: Option<f64>,
    pub speedup_e: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("records come from different models ({0} vs {1})")]
    DifferentModels(String, String),
    #[error("at least two records are needed")]
    TooFew,
}

fn precision_of(s: &RunSettings) -> f64 {
    match s.method {
        Method::TwoState | Method::ParTwoState => s.precision,
        Method::Skart | Method::ParSkart => s.h_star,
    }
}

/// Pairs every later record with the first one, property by property.
/// Properties without a successful estimate on both sides are left out.
pub fn compare(records: &[RunRecord]) -> Result<Vec<PairRow>, CompareError> {
    let (base, rest) = records.split_first().ok_or(CompareError::TooFew)?;
    if rest.is_empty() {
        return Err(CompareError::TooFew);
    }
    let mut rows = Vec::new();
    for other in rest {
        if other.model_hash != base.model_hash {
            return Err(CompareError::DifferentModels(
                base.model_hash.clone(),
                other.model_hash.clone(),
            ));
        }
        for p in &base.properties {
            let Some(a) = &p.result else { continue };
            let Some(b) = other
                .properties
                .iter()
                .find(|q| q.name == p.name)
                .and_then(|q| q.result.as_ref())
            else {
                continue;
            };
            let difference = (a.estimate - b.estimate).abs();
            let speed = speedup_metrics(
                a.wall_time.as_secs_f64(),
                b.wall_time.as_secs_f64(),
                a.sample_size as f64,
                b.sample_size as f64,
            )
            .ok();
            rows.push(PairRow {
                property: p.name.clone(),
                first: base.method.to_string(),
                second: other.method.to_string(),
                estimate_first: a.estimate,
                estimate_second: b.estimate,
                difference,
                exceeds_2r: difference > 2.0 * precision_of(&base.settings),
                speedup: speed.map(|s| s.0),
                speedup_e: speed.map(|s| s.1),
            });
        }
    }
    Ok(rows)
}

pub fn pairs_to_csv(rows: &[PairRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "property", "first", "second", "estimate_first", "estimate_second", "difference",
        "exceeds_2r", "speedup", "speedup_e",
    ])
    .expect("in-memory write");
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.property.clone(),
            r.first.clone(),
            r.second.clone(),
            num(r.estimate_first),
            num(r.estimate_second),
            num(r.difference),
            r.exceeds_2r.to_string(),
            opt(r.speedup),
            opt(r.speedup_e),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn pairs_to_json(rows: &[PairRow]) -> String {
    let mut v = serde_json::to_value(rows).expect("rows serialise");
    round_value(&mut v);
    serde_json::to_string_pretty(&v).expect("values serialise")
}
