use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::baseline::empirical_star_baseline;
use super::scenario::{generate, Instance, MethodSpec, ScenarioSpec};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::{erm, evaluate};
use crate::procedure::{aggregate, AggregationConfig};
use crate::rng::{derive_seed, stream};

pub const REPORT_SCHEMA: &str = "starmid.report/1";
pub const SUMMARY_SCHEMA: &str = "starmid.summary/1";
pub const SLOPES_SCHEMA: &str = "starmid.slopes/1";
pub const MANIFEST_SCHEMA: &str = "starmid.manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: String,
    pub n: usize,
    pub replication: usize,
    pub excess_risk: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub n: usize,
    pub median_excess: f64,
    pub iqr_lo: f64,
    pub iqr_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub method: String,
    /// Least-squares slope of `ln median` on `ln n`; NaN when some median is
    /// not positive.
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub scenario: ScenarioSpec,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
    pub slopes: Vec<SlopeRow>,
}

impl ExperimentReport {
    pub fn summary_for(&self, method: &str) -> Vec<&SummaryRow> {
        self.summary.iter().filter(|s| s.method == method).collect()
    }

    pub fn slope_for(&self, method: &str) -> Option<&SlopeRow> {
        self.slopes.iter().find(|s| s.method == method)
    }
}

/// Seed of replication `r` at sample size `n`.
pub fn replication_seed(master: u64, n: usize, r: usize) -> u64 {
    derive_seed(derive_seed(master, stream::REPLICATION, n as u64), stream::REPLICATION, r as u64)
}

/// Excess risk over the oracle `f*` of the hypothesis `method` returns on
/// `instance`.
pub fn run_method(method: &MethodSpec, instance: &Instance, config: &AggregationConfig) -> Result<f64> {
    let (_, best) = instance.f_star;
    let h = match method {
        MethodSpec::PowerLaw { coef, exponent } => return Ok(coef * (instance.sample.len() as f64).powf(*exponent)),
        MethodSpec::Procedure => {
            let res = aggregate(&instance.sample, &instance.dictionary, config)?;
            instance.dictionary.midpoint(res.selected)
        }
        MethodSpec::Erm => {
            let evals = evaluate(&instance.dictionary, &instance.sample)?;
            let (id, _) = erm(&evals.columns().collect::<Vec<_>>(), instance.sample.ys())?;
            instance.dictionary.get(id).clone()
        }
        MethodSpec::Star => empirical_star_baseline(&instance.sample, &instance.dictionary)?.hypothesis,
    };
    Ok(instance.oracle.risk(&h)?.mean - best)
}

fn run_cell(scenario: &ScenarioSpec, n: usize, r: usize) -> Result<Vec<ReportRow>> {
    let seed = replication_seed(scenario.master_seed, n, r);
    let needs_data = scenario.methods.iter().any(|m| !matches!(m, MethodSpec::PowerLaw { .. }));
    let instance = if needs_data { Some(generate(scenario, n, seed)?) } else { None };
    scenario
        .methods
        .iter()
        .map(|m| {
            let excess_risk = match (m, &instance) {
                (MethodSpec::PowerLaw { coef, exponent }, _) => coef * (n as f64).powf(*exponent),
                (_, Some(inst)) => run_method(m, inst, &scenario.procedure)?,
                (_, None) => unreachable!("data is generated whenever a data method is listed"),
            };
            Ok(ReportRow { method: m.name().to_string(), n, replication: r, excess_risk, seed })
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Least-squares fit of `y = a + b x`; returns `(b, a, stderr of b)`.
pub fn fit_slope(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let k = points.len() as f64;
    if points.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if points.len() > 2 {
        let ssr: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, stderr)
}

fn summarize(scenario: &ScenarioSpec, rows: &[ReportRow]) -> (Vec<SummaryRow>, Vec<SlopeRow>) {
    let mut summary = Vec::new();
    let mut slopes = Vec::new();
    for m in &scenario.methods {
        let name = m.name();
        let mut points = Vec::new();
        for &n in &scenario.n_grid {
            let mut v: Vec<f64> = rows.iter().filter(|r| r.method == name && r.n == n).map(|r| r.excess_risk).collect();
            if v.is_empty() {
                continue;
            }
            v.sort_by(f64::total_cmp);
            let median = quantile(&v, 0.5);
            summary.push(SummaryRow {
                method: name.to_string(),
                n,
                median_excess: median,
                iqr_lo: quantile(&v, 0.25),
                iqr_hi: quantile(&v, 0.75),
            });
            points.push(((n as f64).ln(), median));
        }
        let (slope, intercept, stderr) = if points.iter().all(|p| p.1 > 0.0) {
            let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, y.ln())).collect();
            fit_slope(&logs)
        } else {
            log::warn!("method {name}: a median excess risk is not positive, slope undefined");
            (f64::NAN, f64::NAN, f64::NAN)
        };
        slopes.push(SlopeRow { method: name.to_string(), slope, intercept, stderr });
    }
    (summary, slopes)
}

/// Runs every `(n, replication)` cell; on failure returns the rows of the
/// cells that completed, in grid order, with the first error.
fn run_cells(scenario: &ScenarioSpec) -> (Vec<ReportRow>, Option<Error>) {
    let cells: Vec<(usize, usize)> = scenario
        .n_grid
        .iter()
        .flat_map(|&n| (0..scenario.replications).map(move |r| (n, r)))
        .collect();
    let results: Vec<Result<Vec<ReportRow>>> = cells.par_iter().map(|&(n, r)| run_cell(scenario, n, r)).collect();
    let mut rows = Vec::new();
    let mut first_err = None;
    for res in results {
        match res {
            Ok(r) => rows.extend(r),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    (rows, first_err)
}

pub fn run_experiment(scenario: &ScenarioSpec) -> Result<ExperimentReport> {
    scenario.validate()?;
    let (rows, err) = run_cells(scenario);
    if let Some(e) = err {
        return Err(e);
    }
    let (summary, slopes) = summarize(scenario, &rows);
    Ok(ExperimentReport { scenario: scenario.clone(), rows, summary, slopes })
}

fn csv_bytes(schema: &str, header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut out = format!("# schema={schema}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
        w.write_record(header).map_err(to_io)?;
        for r in records {
            w.write_record(&r).map_err(to_io)?;
        }
        w.flush()?;
    }
    Ok(out)
}

fn report_csv(rows: &[ReportRow]) -> Result<Vec<u8>> {
    csv_bytes(
        REPORT_SCHEMA,
        &["method", "n", "replication", "excess_risk", "seed"],
        rows.iter().map(|r| {
            vec![r.method.clone(), r.n.to_string(), r.replication.to_string(), r.excess_risk.to_string(), r.seed.to_string()]
        }),
    )
}

/// Writes `report.csv`, `summary.csv`, `slopes.csv` and `manifest.json`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("report.csv"), &report_csv(&report.rows)?)?;
    let summary = csv_bytes(
        SUMMARY_SCHEMA,
        &["method", "n", "median_excess", "iqr_lo", "iqr_hi"],
        report.summary.iter().map(|s| {
            vec![s.method.clone(), s.n.to_string(), s.median_excess.to_string(), s.iqr_lo.to_string(), s.iqr_hi.to_string()]
        }),
    )?;
    write_atomic(&dir.join("summary.csv"), &summary)?;
    let slopes = csv_bytes(
        SLOPES_SCHEMA,
        &["method", "slope", "stderr"],
        report.slopes.iter().map(|s| vec![s.method.clone(), s.slope.to_string(), s.stderr.to_string()]),
    )?;
    write_atomic(&dir.join("slopes.csv"), &slopes)?;
    let manifest = serde_json::json!({
        "schema": MANIFEST_SCHEMA,
        "scenario": report.scenario,
        "master_seed": report.scenario.master_seed,
        "files": ["report.csv", "summary.csv", "slopes.csv"],
    });
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Numeric(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(&dir.join("manifest.json"), &bytes)
}

/// [`run_experiment`] followed by [`write_report`]. If a cell fails, the
/// rows completed so far are written to `report.csv` before the error is
/// returned.
pub fn run_and_write(scenario: &ScenarioSpec, dir: &Path) -> Result<ExperimentReport> {
    scenario.validate()?;
    let (rows, err) = run_cells(scenario);
    if let Some(e) = err {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("report.csv"), &report_csv(&rows)?)?;
        return Err(e);
    }
    let (summary, slopes) = summarize(scenario, &rows);
    let report = ExperimentReport { scenario: scenario.clone(), rows, summary, slopes };
    write_report(&report, dir)?;
    Ok(report)
}
