use serde::Serialize;

use super::class::LocalizedClass;
use super::fixed_point::{fixed_point, FixedPointEstimate, FixedPointOptions};
use super::process::{ProcessDraws, Sampling};
use crate::error::{Error, Result};
use crate::model::{all_midpoints, evaluate, Dictionary, Midpoint, RiskOracle, SampleSet};

/// Slopes of the three fixed points: `c1` for the multiplier quantile, `c2`
/// for the Gaussian process, `c3` for the Rademacher process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl RateConstants {
    /// `c1 = rho / 4` with `rho = (alpha / 20 beta)^2`; `c2 = c3 = alpha^2 / l`.
    pub fn from_calibration(alpha: f64, beta: f64, block_len: usize) -> Self {
        let rho = (alpha / (20.0 * beta)).powi(2);
        let slope = alpha * alpha / block_len as f64;
        Self { c1: rho / 4.0, c2: slope, c3: slope }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateOptions {
    /// Confidence parameter; the multiplier quantile is taken at `delta / 2`.
    pub delta: f64,
    pub mc_rounds: usize,
    pub seed: u64,
    pub tol: f64,
    /// Lower end of the search grid; defaults to `1e-6` times the largest
    /// generator norm.
    pub r_min: Option<f64>,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { delta: 0.05, mc_rounds: 2000, seed: 0, tol: 0.02, r_min: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterRate {
    pub center: Midpoint,
    pub fixed_point: FixedPointEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimisticRate {
    /// A squared radius.
    pub r_opt: f64,
    pub r_q1: FixedPointEstimate,
    pub r_q2: FixedPointEstimate,
    pub r_m: Vec<CenterRate>,
    pub worst_center: Option<Midpoint>,
}

/// A search range that certainly contains the fixed point: beyond the largest
/// norm the localized sup is constant, so the crossing radius has a closed
/// form there.
pub(crate) fn search_range(
    draws: &ProcessDraws,
    cls: &LocalizedClass,
    zeta: f64,
    n: usize,
    options: &RateOptions,
) -> Result<FixedPointOptions> {
    let d = cls.max_norm();
    let scale = if d > 0.0 { d } else { 1.0 };
    let r_min = options.r_min.unwrap_or(1e-6 * scale);
    let (ratio, _) = draws.ratio(scale);
    let saturated = ratio * scale;
    let base = saturated / (zeta * (n as f64).sqrt());
    let crossing = if draws.kind().exponent() == 2 { base.sqrt() } else { base };
    let r_max = (2.0 * scale).max(1.1 * crossing).max(2.0 * r_min);
    FixedPointOptions::new(r_min, r_max, options.tol)
}

fn solve(draws: &ProcessDraws, cls: &LocalizedClass, zeta: f64, n: usize, options: &RateOptions) -> Result<FixedPointEstimate> {
    let range = search_range(draws, cls, zeta, n, options)?;
    fixed_point(draws, zeta, n, &range)
}

/// `2 * sup_{u0 in U} max(r_M^2, r_Q1^2, r_Q2^2)`, exact over the finite set
/// of midpoints. `sample` supplies the points for the Rademacher and
/// multiplier processes; `oracle` supplies `L_2` inner products.
pub fn r_opt(
    dictionary: &Dictionary,
    sample: &SampleSet,
    oracle: &RiskOracle,
    constants: RateConstants,
    options: &RateOptions,
) -> Result<OptimisticRate> {
    if !(options.delta > 0.0 && options.delta < 1.0) {
        return Err(Error::config("delta", format!("must lie in (0, 1), got {}", options.delta)));
    }
    for (name, c) in [("c1", constants.c1), ("c2", constants.c2), ("c3", constants.c3)] {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::config(name, format!("must be positive, got {c}")));
        }
    }
    let n = sample.len();
    let sampling = Sampling::Random { rounds: options.mc_rounds, seed: options.seed };
    let gram = oracle.gram(dictionary.hypotheses())?;
    let evals = evaluate(dictionary, sample)?;

    let q_class = LocalizedClass::midpoint_differences(&gram)?;
    let gauss = ProcessDraws::gaussian(&q_class, &gram, sampling)?;
    let r_q1 = solve(&gauss, &q_class, constants.c2, n, options)?;
    let rad = ProcessDraws::rademacher(&q_class, &evals, sampling)?;
    let r_q2 = solve(&rad, &q_class, constants.c3, n, options)?;

    let mut r_m = Vec::new();
    for center in all_midpoints(dictionary.len()) {
        let cls = LocalizedClass::star_around(&gram, center)?;
        let fitted = evals.midpoint_column(center);
        let residuals: Vec<f64> = fitted.iter().zip(sample.ys()).map(|(f, y)| f - y).collect();
        let draws = ProcessDraws::multiplier(&cls, &evals, &residuals, options.delta / 2.0, sampling)?;
        let fixed_point = solve(&draws, &cls, constants.c1, n, options)?;
        r_m.push(CenterRate { center, fixed_point });
    }

    let mut worst_center = None;
    let mut sup = r_q1.r.powi(2).max(r_q2.r.powi(2));
    let mut worst_m = f64::NEG_INFINITY;
    for c in &r_m {
        let v = c.fixed_point.r.powi(2);
        if v > worst_m {
            worst_m = v;
            worst_center = Some(c.center);
        }
        sup = sup.max(v);
    }
    Ok(OptimisticRate { r_opt: 2.0 * sup, r_q1, r_q2, r_m, worst_center })
}
