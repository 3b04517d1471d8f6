//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input parse failure, 3 configuration invariant
//! failure, 4 numeric failure. Every output file is written to a temporary
//! sibling and renamed into place.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{self, CalibrationOptions, ScenarioSpec};
use crate::complexity::{check_event_a, r_opt, EventConfig, RateConstants, RateOptions};
use crate::error::{Error, Result};
use crate::io::{parse_toml, read_dictionary, read_evaluations, read_sample, write_atomic};
use crate::model::{evaluate, Affine, AnalyticOracle, Midpoint, MonteCarloOracle, RiskOracle};
use crate::procedure::{aggregate, aggregate_matrix, resolve_radius, AggregationConfig};

pub const AGGREGATE_SCHEMA: &str = "starmid.aggregate/1";
pub const COMPLEXITY_SCHEMA: &str = "starmid.complexity/1";
pub const EVENT_SCHEMA: &str = "starmid.event/1";
pub const CALIBRATION_SCHEMA: &str = "starmid.calibration/1";

#[derive(Debug, Parser)]
#[command(name = "starmid", version, about = "Median-of-means aggregation over finite dictionaries")]
pub struct Cli {
    /// TOML configuration (a scenario for `simulate` and `calibrate`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for outputs (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, global = true, env = "STARMID_THREADS")]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Sample CSV: covariate columns and a `y` column.
    #[arg(long)]
    pub sample: Option<PathBuf>,
    /// Dictionary CSV: one hypothesis per row, optional `offset` column.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the two-stage procedure and write `result.json`.
    Aggregate {
        #[command(flatten)]
        data: DataArgs,
        /// Precomputed evaluations: one column per hypothesis plus `y`.
        #[arg(long, conflicts_with_all = ["sample", "dictionary"])]
        evaluations: Option<PathBuf>,
    },
    /// Run a scenario sweep and write the report CSVs.
    Simulate,
    /// Estimate the optimistic rate and write `complexity.json`.
    Complexity {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Check the sample event and write `event.json`.
    CheckEvent {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Calibrate the median-of-means constants and write `calibration.json`.
    Calibrate {
        /// Candidate block lengths.
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,9,15,25")]
        ell_grid: Vec<usize>,
        #[arg(long, default_value_t = 0.99)]
        coverage: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Sample size of each calibration trial.
        #[arg(long, default_value_t = 2048)]
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OracleSection {
    Analytic {
        second_moment: Vec<Vec<f64>>,
        target: Affine,
        noise_second_moment: f64,
    },
    /// A large labelled sample, disjoint from the training data.
    Sample { sample: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ComplexitySection {
    pub delta: Option<f64>,
    pub mc_rounds: Option<usize>,
    pub tol: Option<f64>,
    pub r_min: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EventSection {
    /// Center `u0` as a pair of ids; defaults to `[0, 0]`.
    pub center: Option<[usize; 2]>,
    /// Defaults to the procedure's radius resolved on the sample.
    pub r_u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub procedure: AggregationConfig,
    pub oracle: Option<OracleSection>,
    #[serde(default)]
    pub complexity: ComplexitySection,
    #[serde(default)]
    pub event: EventSection,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Io(_) => 2,
        Error::InvalidConfig { .. } | Error::DimensionMismatch(_) | Error::EmptyCandidates => 3,
        Error::Numeric(_) | Error::FixedPointUnmet { .. } | Error::Calibration(_) => 4,
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse { source_name: path.display().to_string(), line: 0, reason: e.to_string() })
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::config(flag, format!("--{flag} is required")))
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    match &cli.config {
        Some(p) => parse_toml(&read_text(p)?, &p.display().to_string()),
        None => Ok(RunConfig::default()),
    }
}

fn scenario(cli: &Cli) -> Result<ScenarioSpec> {
    let path = require(&cli.config, "config")?;
    let mut s: ScenarioSpec = parse_toml(&read_text(path)?, &path.display().to_string())?;
    if let Some(seed) = cli.seed {
        s.master_seed = seed;
    }
    s.validate()?;
    Ok(s)
}

fn oracle(config: &RunConfig, base: Option<&Path>) -> Result<RiskOracle> {
    match &config.oracle {
        None => Err(Error::config("oracle", "this subcommand needs an [oracle] section")),
        Some(OracleSection::Analytic { second_moment, target, noise_second_moment }) => Ok(RiskOracle::Analytic(
            AnalyticOracle::new(second_moment.clone(), target.clone(), *noise_second_moment)?,
        )),
        Some(OracleSection::Sample { sample }) => {
            let path = match base {
                Some(dir) if sample.is_relative() => dir.join(sample),
                _ => sample.clone(),
            };
            Ok(RiskOracle::MonteCarlo(MonteCarloOracle { sample: read_sample(&path)?, seed: 0 }))
        }
    }
}

fn write_json<T: Serialize>(path: &Path, schema: &str, key: &str, value: &T) -> Result<()> {
    let doc = serde_json::json!({ "schema": schema, key: value });
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Numeric(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cli.out_dir)?;
    let config_dir = cli.config.as_deref().and_then(Path::parent);
    match &cli.command {
        Command::Aggregate { data, evaluations } => {
            let config = run_config(cli)?;
            let result = if let Some(e) = evaluations {
                let (evals, ys) = read_evaluations(e)?;
                aggregate_matrix(&evals, &ys, &config.procedure)?
            } else {
                let sample = read_sample(require(&data.sample, "sample")?)?;
                let dictionary = read_dictionary(require(&data.dictionary, "dictionary")?)?;
                aggregate(&sample, &dictionary, &config.procedure)?
            };
            let out = cli.out_dir.join("result.json");
            write_json(&out, AGGREGATE_SCHEMA, "result", &result)?;
            Ok(vec![out])
        }
        Command::Simulate => {
            let s = scenario(cli)?;
            bench::run_and_write(&s, &cli.out_dir)?;
            Ok(["report.csv", "summary.csv", "slopes.csv", "manifest.json"].iter().map(|f| cli.out_dir.join(f)).collect())
        }
        Command::Complexity { data } => {
            let config = run_config(cli)?;
            let sample = read_sample(require(&data.sample, "sample")?)?;
            let dictionary = read_dictionary(require(&data.dictionary, "dictionary")?)?;
            let oracle = oracle(&config, config_dir)?;
            let p = &config.procedure;
            p.validate()?;
            let defaults = RateConstants::from_calibration(p.alpha, p.beta, p.block_len);
            let c = &config.complexity;
            let constants = RateConstants {
                c1: c.c1.unwrap_or(defaults.c1),
                c2: c.c2.unwrap_or(defaults.c2),
                c3: c.c3.unwrap_or(defaults.c3),
            };
            let base = RateOptions::default();
            let options = RateOptions {
                delta: c.delta.unwrap_or(base.delta),
                mc_rounds: c.mc_rounds.unwrap_or(base.mc_rounds),
                seed: cli.seed.unwrap_or(base.seed),
                tol: c.tol.unwrap_or(base.tol),
                r_min: c.r_min,
            };
            let rate = r_opt(&dictionary, &sample, &oracle, constants, &options)?;
            let out = cli.out_dir.join("complexity.json");
            let body = serde_json::json!({ "constants": constants, "options": options, "rate": rate });
            write_json(&out, COMPLEXITY_SCHEMA, "report", &body)?;
            Ok(vec![out])
        }
        Command::CheckEvent { data } => {
            let config = run_config(cli)?;
            let sample = read_sample(require(&data.sample, "sample")?)?;
            let dictionary = read_dictionary(require(&data.dictionary, "dictionary")?)?;
            let oracle = oracle(&config, config_dir)?;
            config.procedure.validate()?;
            let [a, b] = config.event.center.unwrap_or([0, 0]);
            let r_u = match config.event.r_u {
                Some(r) => r,
                None => {
                    let evals = evaluate(&dictionary, &sample)?;
                    resolve_radius(&config.procedure, &evals, sample.ys())?
                }
            };
            let event = EventConfig::from_aggregation(&config.procedure, r_u);
            let report = check_event_a(&sample, &dictionary, Midpoint::new(a, b), &oracle, &event)?;
            let out = cli.out_dir.join("event.json");
            let body = serde_json::json!({ "config": event, "result": report });
            write_json(&out, EVENT_SCHEMA, "report", &body)?;
            Ok(vec![out])
        }
        Command::Calibrate { ell_grid, coverage, trials, n } => {
            let s = scenario(cli)?;
            let options = CalibrationOptions { trials: *trials, n: *n, seed: s.master_seed, ..CalibrationOptions::default() };
            let cal = bench::calibrate_mom_constants(&s, ell_grid, *coverage, &options)?;
            let out = cli.out_dir.join("calibration.json");
            write_json(&out, CALIBRATION_SCHEMA, "calibration", &cal)?;
            Ok(vec![out])
        }
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not configure the thread pool: {e}");
        }
    }
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
