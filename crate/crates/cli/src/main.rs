use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pbn_steady::model::{parse_model, random_pbn, serialize_model, PbnModel, RandomPbnSpec};
use pbn_steady::sim::{parse_properties, MetaProperty, PerturbationMode, DEFAULT_STEP_CAP};
use pbn_steady_cli::{
    compare, exit_code, from_json, pairs_to_csv, pairs_to_json, run, to_csv, to_json, Method,
    RunRecord, RunSettings,
};

#[derive(Parser)]
#[command(name = "pbn-steady", version, about = "Steady-state analysis of probabilistic Boolean networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Perturbation {
    PerNode,
    GeometricSkip,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random network.
    Generate {
        #[arg(long)]
        nodes: usize,
        /// Predictor functions per node, as min:max.
        #[arg(long = "fn", value_parser = parse_range)]
        functions: (usize, usize),
        /// Parents per function, as min:max.
        #[arg(long, value_parser = parse_range)]
        parents: (usize, usize),
        #[arg(long, default_value_t = 0.01)]
        perturbation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Estimate steady-state probabilities of the given properties.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        properties: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::TwoState)]
        method: Method,
        #[arg(long, default_value_t = 1e-4)]
        precision: f64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long, default_value_t = 1e-10)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        hstar: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 4)]
        omega: usize,
        #[arg(long, default_value_t = 1000)]
        psi0: u64,
        #[arg(long, default_value_t = 1.1)]
        rhat_threshold: f64,
        #[arg(long, env = "PBN_WORKERS")]
        workers: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        cap: u64,
        #[arg(long, value_enum, default_value_t = Perturbation::PerNode)]
        perturbation_mode: Perturbation,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Tabulate differences and speed-ups of later records against the first.
    Compare {
        #[arg(required = true, num_args = 2..)]
        records: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Re-run a JSON record and check that the estimates come out the same.
    Replay {
        record: PathBuf,
        /// Model file, if it has moved since the record was written.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        properties: PathBuf,
        #[arg(long, env = "PBN_WORKERS")]
        workers: Option<usize>,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected min:max, got `{s}`"))?;
    let a = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    Ok((a, b))
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 5,
        message: format!("{}: {e}", path.display()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| io(path, e))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io(p, e)),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn load(model: &Path, properties: &Path) -> Result<(PbnModel, Vec<MetaProperty>), Failure> {
    let m = parse_model(&read(model)?).map_err(|e| usage(format!("{}: {e}", model.display())))?;
    let p = parse_properties(&read(properties)?, m.n)
        .map_err(|e| usage(format!("{}: {e}", properties.display())))?;
    Ok((m, p))
}

fn default_workers(workers: Option<usize>) -> usize {
    workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run_command(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Generate {
            nodes,
            functions,
            parents,
            perturbation,
            seed,
            out,
        } => {
            let spec = RandomPbnSpec::new(nodes, functions, parents).with_perturbation(perturbation);
            let model = random_pbn(&spec, seed).map_err(usage)?;
            emit(&serialize_model(&model), out.as_deref())?;
            Ok(0)
        }
        Command::Analyze {
            model,
            properties,
            method,
            precision,
            confidence,
            epsilon,
            hstar,
            alpha,
            omega,
            psi0,
            rhat_threshold,
            workers,
            seed,
            cap,
            perturbation_mode,
            out,
            format,
        } => {
            let (m, props) = load(&model, &properties)?;
            let settings = RunSettings {
                method,
                precision,
                confidence,
                epsilon,
                h_star: hstar,
                alpha,
                omega,
                psi0,
                rhat_threshold,
                seed,
                cap,
                perturbation_mode: match perturbation_mode {
                    Perturbation::PerNode => PerturbationMode::PerNode,
                    Perturbation::GeometricSkip => PerturbationMode::GeometricSkip,
                },
            };
            let record = run(&m, Some(model.display().to_string()), &props, &settings, default_workers(workers));
            let text = match format {
                Format::Json => to_json(&record),
                Format::Csv => to_csv(&record),
            };
            emit(&text, out.as_deref())?;
            for p in &record.properties {
                if let Some(e) = &p.error {
                    eprintln!("{}: {e}", p.name);
                }
            }
            Ok(exit_code(&record) as u8)
        }
        Command::Compare { records, out, format } => {
            let parsed = records
                .iter()
                .map(|p| from_json(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display()))))
                .collect::<Result<Vec<RunRecord>, _>>()?;
            let rows = compare(&parsed).map_err(usage)?;
            let text = match format {
                Format::Json => pairs_to_json(&rows),
                Format::Csv => pairs_to_csv(&rows),
            };
            emit(&text, out.as_deref())?;
            Ok(0)
        }
        Command::Replay {
            record,
            model,
            properties,
            workers,
        } => {
            let old = from_json(&read(&record)?).map_err(|e| usage(format!("{}: {e}", record.display())))?;
            let model_path = model
                .or_else(|| old.model_path.as_ref().map(PathBuf::from))
                .ok_or_else(|| usage("the record names no model file; pass --model"))?;
            let (m, props) = load(&model_path, &properties)?;
            let workers = workers.unwrap_or(old.workers);
            let new = run(&m, old.model_path.clone(), &props, &old.settings, workers);
            if new.model_hash != old.model_hash {
                return Err(usage(format!(
                    "model hash {} does not match the record's {}",
                    new.model_hash, old.model_hash
                )));
            }
            // compare through the serialised form, which is what the record holds
            let new = from_json(&to_json(&new)).expect("records round-trip");
            let mut same = new.properties.len() == old.properties.len();
            for (a, b) in old.properties.iter().zip(&new.properties) {
                let ok = a.name == b.name
                    && a.status == b.status
                    && match (&a.result, &b.result) {
                        (Some(x), Some(y)) => x.same_outcome(y),
                        (None, None) => true,
                        _ => false,
                    };
                let shown = |r: &Option<pbn_steady::EstimateResult>| {
                    r.as_ref().map_or("-".to_string(), |r| r.estimate.to_string())
                };
                println!(
                    "{}\t{}\t{}\t{}",
                    a.name,
                    shown(&a.result),
                    shown(&b.result),
                    if ok { "same" } else { "DIFFERENT" }
                );
                same &= ok;
            }
            Ok(if same { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
