//! Synthetic scenarios, baselines and rate experiments.
//!
//! A scenario fixes the covariate design, a seeded dictionary and a target;
//! each `(n, replication)` cell draws a fresh sample from a counter-derived
//! seed and scores every method by its excess risk over the best dictionary
//! member, computed from closed-form population risks.

mod baseline;
mod calibrate;
mod experiment;
mod scenario;

pub use baseline::{empirical_star_baseline, segment_minimizer, StarResult};
pub use calibrate::{
    calibrate_from_draws, calibrate_mom_constants, ratio_extremes, tightest_interval, Calibration, CalibrationOptions,
};
pub use experiment::{
    fit_slope, quantile, replication_seed, run_and_write, run_experiment, run_method, write_report, ExperimentReport,
    ReportRow, SlopeRow, SummaryRow, MANIFEST_SCHEMA, REPORT_SCHEMA, SLOPES_SCHEMA, SUMMARY_SCHEMA,
};
pub use scenario::{
    default_scenario, generate, DesignSpec, DictionarySpec, Instance, MethodSpec, NoiseSpec, ScenarioSpec, TargetSpec,
};
