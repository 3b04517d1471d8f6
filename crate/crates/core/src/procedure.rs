//! The two-stage aggregation procedure.
//!
//! Stage one works on the first half `D1` of the sample. With `f_hat` the
//! empirical risk minimizer on `D1`, a dictionary member `f` is kept in `V`
//! when
//!
//! ```text
//! P_N (f - Y)^2 <= P_N (f_hat - Y)^2
//!                  + threshold_factor * max{ r_U^2, rho / alpha^2 * Med_l(|f_hat - f|)^2 }
//! ```
//!
//! Stage two runs ERM over all midpoints `W = {(v1 + v2)/2 : v1, v2 in V}` on
//! the second half `D2`. The two halves never mix: `V` only sees `D1`, the
//! final selection only sees `D2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{empirical_risk, erm, evaluate, Dictionary, EvaluationMatrix, Midpoint, SampleSet};
use crate::mom::{mom_abs_distance, partition_blocks};

/// Where the localization radius `r_U` comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusSource {
    Explicit { value: f64 },
    /// `r_U^2 = kappa * sigma_hat^2 * ln(M) / n1`, with `sigma_hat^2` the
    /// empirical risk of `f_hat` on `D1`.
    PlugIn { kappa: f64 },
    /// Monte Carlo optimistic rate; must be resolved into an explicit value
    /// with [`crate::complexity::r_opt`] before calling [`aggregate`].
    OptimisticRate,
}

impl Default for RadiusSource {
    fn default() -> Self {
        RadiusSource::PlugIn { kappa: 1.0 }
    }
}

fn default_block_len() -> usize {
    9
}
fn default_alpha() -> f64 {
    0.25
}
fn default_beta() -> f64 {
    4.0
}
fn default_threshold_factor() -> f64 {
    3.0
}
fn default_guarantee_factor() -> f64 {
    6.0
}
fn default_theta() -> f64 {
    1.0 / 32.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationConfig {
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Defaults to `(alpha / (20 beta))^2`.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub r_u: RadiusSource,
    #[serde(default = "default_threshold_factor")]
    pub threshold_factor: f64,
    /// `C` in the excess-risk guarantee `C * r_U^2`.
    #[serde(default = "default_guarantee_factor")]
    pub guarantee_factor: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            block_len: default_block_len(),
            alpha: default_alpha(),
            beta: default_beta(),
            rho: None,
            r_u: RadiusSource::default(),
            threshold_factor: default_threshold_factor(),
            guarantee_factor: default_guarantee_factor(),
            theta: default_theta(),
        }
    }
}

impl AggregationConfig {
    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or_else(|| (self.alpha / (20.0 * self.beta)).powi(2))
    }

    pub fn with_radius(mut self, r_u: f64) -> Self {
        self.r_u = RadiusSource::Explicit { value: r_u };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_len == 0 {
            return Err(Error::config("block_len", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha", format!("{} is outside (0, 1]", self.alpha)));
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(Error::config("beta", format!("{} is below 1", self.beta)));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::config("rho", format!("{rho} is outside (0, 1)")));
            }
        }
        if !(self.theta > 0.0 && self.theta <= 1.0 / 32.0) {
            return Err(Error::config("theta", format!("{} is outside (0, 1/32]", self.theta)));
        }
        if !(self.threshold_factor >= 0.0 && self.threshold_factor.is_finite()) {
            return Err(Error::config("threshold_factor", "must be a nonnegative number"));
        }
        if !(self.guarantee_factor >= 1.0 && self.guarantee_factor.is_finite()) {
            return Err(Error::config("guarantee_factor", "must be at least 1"));
        }
        match self.r_u {
            RadiusSource::Explicit { value } if !(value >= 0.0 && value.is_finite()) => {
                Err(Error::config("r_u.value", format!("{value} is not a nonnegative radius")))
            }
            RadiusSource::PlugIn { kappa } if !(kappa >= 0.0 && kappa.is_finite()) => {
                Err(Error::config("r_u.kappa", format!("{kappa} is not nonnegative")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateAudit {
    pub id: usize,
    pub empirical_risk: f64,
    /// `Med_l(|f_hat - f|)` on `D1`.
    pub mom_distance: f64,
    pub threshold: f64,
    /// `risk(f_hat) + threshold - risk(f)`; membership iff nonnegative.
    pub slack: f64,
    pub in_v: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VSelection {
    pub f_hat_id: usize,
    pub v_ids: Vec<usize>,
    pub r_u: f64,
    pub audit: Vec<CandidateAudit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregationResult {
    pub f_hat_id: usize,
    pub v_ids: Vec<usize>,
    pub w_pairs: Vec<Midpoint>,
    pub selected: Midpoint,
    /// Empirical risk of `selected` on `D2`.
    pub selected_risk: f64,
    pub r_u: f64,
    pub rho: f64,
    pub audit: Vec<CandidateAudit>,
}

/// Resolves `r_U` for a first-half evaluation matrix.
pub fn resolve_radius(config: &AggregationConfig, d1: &EvaluationMatrix, ys: &[f64]) -> Result<f64> {
    match config.r_u {
        RadiusSource::Explicit { value } => Ok(value),
        RadiusSource::PlugIn { kappa } => {
            let columns: Vec<&[f64]> = d1.columns().collect();
            let (_, sigma2) = erm(&columns, ys)?;
            let m = d1.cols() as f64;
            Ok((kappa * sigma2 * m.ln() / ys.len() as f64).sqrt())
        }
        RadiusSource::OptimisticRate => Err(Error::config(
            "r_u",
            "optimistic-rate radius needs an oracle; resolve it with complexity::r_opt first",
        )),
    }
}

/// Stage one on the first half, with `r_U` already resolved.
pub fn build_v(d1: &EvaluationMatrix, ys: &[f64], config: &AggregationConfig, r_u: f64) -> Result<VSelection> {
    config.validate()?;
    if ys.len() != d1.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {} evaluated rows",
            ys.len(),
            d1.rows()
        )));
    }
    let partition = partition_blocks(d1.rows(), config.block_len)?;
    let risks: Vec<f64> = d1.columns().map(|c| empirical_risk(c, ys)).collect();
    let (f_hat_id, f_hat_risk) = erm(&d1.columns().collect::<Vec<_>>(), ys)?;
    let f_hat = d1.col(f_hat_id);
    let scale = config.rho() / (config.alpha * config.alpha);
    let r_u2 = r_u * r_u;

    let mut audit = Vec::with_capacity(d1.cols());
    for (id, &risk) in risks.iter().enumerate() {
        let med = mom_abs_distance(f_hat, d1.col(id), &partition)?;
        let threshold = config.threshold_factor * r_u2.max(scale * med * med);
        let slack = f_hat_risk + threshold - risk;
        audit.push(CandidateAudit {
            id,
            empirical_risk: risk,
            mom_distance: med,
            threshold,
            slack,
            in_v: risk <= f_hat_risk + threshold,
        });
    }
    let v_ids: Vec<usize> = audit.iter().filter(|a| a.in_v).map(|a| a.id).collect();
    assert!(
        v_ids.contains(&f_hat_id),
        "empirical minimizer {f_hat_id} must belong to V"
    );
    Ok(VSelection { f_hat_id, v_ids, r_u, audit })
}

/// All midpoints of `V` (including `(v, v)`), lexicographically ordered.
pub fn build_w(v_ids: &[usize]) -> Vec<Midpoint> {
    let mut ids = v_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .enumerate()
        .flat_map(|(a, &j)| ids[a..].iter().map(move |&k| Midpoint { j, k }))
        .collect()
}

/// Runs both stages on an evaluation matrix whose rows are the full sample.
pub fn aggregate_matrix(evals: &EvaluationMatrix, ys: &[f64], config: &AggregationConfig) -> Result<AggregationResult> {
    config.validate()?;
    let n = evals.rows();
    if ys.len() != n {
        return Err(Error::DimensionMismatch(format!("{} responses for {n} rows", ys.len())));
    }
    if n < 2 * config.block_len {
        return Err(Error::config(
            "block_len",
            format!("sample of size {n} is smaller than twice the block length {}", config.block_len),
        ));
    }
    let half = n / 2;
    let d1 = evals.row_range(0, half);
    let (y1, y2) = ys.split_at(half);
    let r_u = resolve_radius(config, &d1, y1)?;
    let v = build_v(&d1, y1, config, r_u)?;
    let w_pairs = build_w(&v.v_ids);

    let d2 = evals.row_range(half, n);
    let risks: Vec<f64> = w_pairs
        .par_iter()
        .map(|&mp| empirical_risk(&d2.midpoint_column(mp), y2))
        .collect();
    let (best, selected_risk) = risks
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &r)| if r < acc.1 { (i, r) } else { acc });

    Ok(AggregationResult {
        f_hat_id: v.f_hat_id,
        v_ids: v.v_ids,
        selected: w_pairs[best],
        w_pairs,
        selected_risk,
        r_u,
        rho: config.rho(),
        audit: v.audit,
    })
}

pub fn aggregate(sample: &SampleSet, dictionary: &Dictionary, config: &AggregationConfig) -> Result<AggregationResult> {
    let evals = evaluate(dictionary, sample)?;
    aggregate_matrix(&evals, sample.ys(), config)
}
