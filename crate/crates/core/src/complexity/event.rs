//! Empirical check of the sample event behind the aggregation guarantee.

use serde::Serialize;

use super::class::LocalizedClass;
use crate::error::{Error, Result};
use crate::model::{all_midpoints, evaluate, Dictionary, Midpoint, RiskOracle, SampleSet};
use crate::mom::{median_of_means, partition_blocks};
use crate::procedure::AggregationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventConfig {
    pub r_u: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub block_len: usize,
}

impl EventConfig {
    pub fn from_aggregation(config: &AggregationConfig, r_u: f64) -> Self {
        Self { r_u, rho: config.rho(), alpha: config.alpha, beta: config.beta, block_len: config.block_len }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BulletReport {
    pub pass: bool,
    /// Number of functions or pairs to which the inequality applied.
    pub checked: usize,
    /// Smallest `rhs - lhs` over the checked cases; `None` when vacuous.
    pub worst_margin: Option<f64>,
    pub worst_case: Option<String>,
}

impl BulletReport {
    fn new() -> Self {
        Self { pass: true, checked: 0, worst_margin: None, worst_case: None }
    }

    fn record(&mut self, margin: f64, case: impl FnOnce() -> String) {
        self.checked += 1;
        if self.worst_margin.is_none_or(|w| margin < w) {
            self.worst_margin = Some(margin);
            self.worst_case = Some(case());
        }
        if !(margin >= 0.0) {
            self.pass = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventReport {
    pub center: Midpoint,
    /// `|P_N xi (u - u0) - E xi (u - u0)| <= rho max(r_U^2, ||u - u0||^2)`.
    pub multiplier: BulletReport,
    /// `P_N h^2 >= (1 - rho) ||h||^2` for `h` in `U - U` with `||h|| >= r_U`.
    pub isometry: BulletReport,
    /// `alpha ||h|| <= Med_l(|h|) <= beta ||h||` above `r_U`, and
    /// `Med_l(|h|) <= beta r_U` below.
    pub median: BulletReport,
    pub all_pass: bool,
}

fn describe(terms: &[(usize, f64)]) -> String {
    terms.iter().map(|(j, c)| format!("{c:+}*f{j}")).collect::<Vec<_>>().join(" ")
}

pub fn check_event_a(
    sample: &SampleSet,
    dictionary: &Dictionary,
    u0: Midpoint,
    oracle: &RiskOracle,
    config: &EventConfig,
) -> Result<EventReport> {
    if u0.k >= dictionary.len() {
        return Err(Error::DimensionMismatch(format!(
            "center {u0:?} outside a dictionary of {}",
            dictionary.len()
        )));
    }
    let evals = evaluate(dictionary, sample)?;
    let gram = oracle.gram(dictionary.hypotheses())?;
    let partition = partition_blocks(sample.len(), config.block_len)?;
    let n = sample.len() as f64;
    let r_u2 = config.r_u * config.r_u;

    let center_fn = dictionary.midpoint(u0);
    let center_col = evals.midpoint_column(u0);
    let residuals: Vec<f64> = center_col.iter().zip(sample.ys()).map(|(f, y)| f - y).collect();

    let mut multiplier = BulletReport::new();
    for u in all_midpoints(dictionary.len()) {
        let w = dictionary.midpoint(u).sub(&center_fn);
        let col = evals.midpoint_column(u);
        let empirical = residuals.iter().zip(col.iter().zip(&center_col)).map(|(xi, (a, b))| xi * (a - b)).sum::<f64>() / n;
        let expected = oracle.residual_cross(&center_fn, &w)?;
        let norm2 = oracle.inner(&w, &w)?.max(0.0);
        let margin = config.rho * r_u2.max(norm2) - (empirical - expected).abs();
        multiplier.record(margin, || format!("u = ({}, {})", u.j, u.k));
    }

    let mut isometry = BulletReport::new();
    let mut median = BulletReport::new();
    let class = LocalizedClass::midpoint_differences(&gram)?;
    for g in class.generators() {
        let col = g.column(&evals);
        let norm = g.norm;
        let abs: Vec<f64> = col.iter().map(|v| v.abs()).collect();
        let med = median_of_means(&abs, &partition)?;
        if norm >= config.r_u {
            let pn = col.iter().map(|v| v * v).sum::<f64>() / n;
            isometry.record(pn - (1.0 - config.rho) * norm * norm, || describe(&g.terms));
            let margin = (med - config.alpha * norm).min(config.beta * norm - med);
            median.record(margin, || describe(&g.terms));
        } else {
            median.record(config.beta * config.r_u - med, || describe(&g.terms));
        }
    }
    let all_pass = multiplier.pass && isometry.pass && median.pass;
    Ok(EventReport { center: u0, multiplier, isometry, median, all_pass })
}
