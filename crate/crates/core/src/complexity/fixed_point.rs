use serde::Serialize;

use super::process::ProcessDraws;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    pub r_min: f64,
    pub r_max: f64,
    /// Relative spacing of the geometric search grid.
    pub tol: f64,
}

impl FixedPointOptions {
    pub fn new(r_min: f64, r_max: f64, tol: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::config("r_range", format!("need 0 < r_min < r_max, got ({r_min}, {r_max})")));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::config("tol", format!("must be positive, got {tol}")));
        }
        Ok(Self { r_min, r_max, tol })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub r: f64,
    pub estimate: f64,
    /// `estimate / r`; non-increasing in `r` on fixed draws.
    pub ratio: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointEstimate {
    pub r: f64,
    pub zeta: f64,
    pub estimate_at_r: f64,
    pub std_error: Option<f64>,
    pub mc_rounds: usize,
    pub solver_trace: Vec<TraceStep>,
}

fn step(draws: &ProcessDraws, zeta: f64, sqrt_n: f64, r: f64) -> TraceStep {
    let (ratio, _) = draws.ratio(r);
    let p = draws.kind().exponent();
    // Compared as ratio <= zeta * sqrt(N) * r^(p-1) so that monotonicity in r
    // is exact in floating point.
    let scaled = zeta * sqrt_n * r.powi(p - 1);
    TraceStep {
        r,
        estimate: ratio * r,
        ratio,
        threshold: scaled * r,
        satisfied: ratio <= scaled,
    }
}

/// Smallest grid radius `r = r_min (1 + tol)^i` at which the process
/// estimate is at most `zeta * r^p * sqrt(N)` (`p = 2` for the multiplier
/// quantile, `p = 1` otherwise), found by bisection over the grid.
///
/// An empty class satisfies the condition at every radius and yields 0.
pub fn fixed_point(draws: &ProcessDraws, zeta: f64, n: usize, opts: &FixedPointOptions) -> Result<FixedPointEstimate> {
    let opts = FixedPointOptions::new(opts.r_min, opts.r_max, opts.tol)?;
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::config("zeta", format!("must be positive, got {zeta}")));
    }
    if n == 0 {
        return Err(Error::config("n", "sample size must be positive"));
    }
    if draws.class_len() == 0 {
        return Ok(FixedPointEstimate {
            r: 0.0,
            zeta,
            estimate_at_r: 0.0,
            std_error: Some(0.0),
            mc_rounds: draws.rounds(),
            solver_trace: Vec::new(),
        });
    }
    let sqrt_n = (n as f64).sqrt();
    let growth = (1.0 + opts.tol).ln();
    let top = ((opts.r_max / opts.r_min).ln() / growth).ceil() as i32;
    let grid = |i: i32| opts.r_min * (growth * f64::from(i)).exp();

    let mut trace = Vec::new();
    let hi_step = step(draws, zeta, sqrt_n, grid(top));
    trace.push(hi_step);
    if !hi_step.satisfied {
        return Err(Error::FixedPointUnmet {
            r_max: hi_step.r,
            reason: format!(
                "estimate {:.6e} exceeds threshold {:.6e} (zeta = {zeta}, N = {n})",
                hi_step.estimate, hi_step.threshold
            ),
        });
    }
    let lo_step = step(draws, zeta, sqrt_n, grid(0));
    trace.push(lo_step);
    let (mut lo, mut hi) = (0, top);
    if lo_step.satisfied {
        hi = 0;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let s = step(draws, zeta, sqrt_n, grid(mid));
        trace.push(s);
        if s.satisfied {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let r = grid(hi);
    let est = draws.estimate(r)?;
    Ok(FixedPointEstimate {
        r,
        zeta,
        estimate_at_r: est.value,
        std_error: est.std_error,
        mc_rounds: draws.rounds(),
        solver_trace: trace,
    })
}
