use rayon::prelude::*;
use serde::Serialize;

use super::scenario::ScenarioSpec;
use crate::complexity::LocalizedClass;
use crate::error::{Error, Result};
use crate::model::{evaluate, Dictionary, RiskOracle, SampleSet};
use crate::mom::{median_of_means, partition_blocks};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationOptions {
    pub trials: usize,
    pub n: usize,
    /// Smallest acceptable `alpha`.
    pub alpha_floor: f64,
    /// Largest acceptable `beta`.
    pub beta_ceiling: f64,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { trials: 200, n: 2048, alpha_floor: 0.25, beta_ceiling: 4.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub block_len: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Fraction of calibration trials in which every pair was covered.
    pub coverage: f64,
    pub trials: usize,
}

/// Per-trial `(min, max)` of `Med_l(|h|) / ||h||` over `h` in `U - U`, for
/// each block length in `ell_grid`.
pub fn ratio_extremes<F>(
    dictionary: &Dictionary,
    oracle: &RiskOracle,
    draw: F,
    ell_grid: &[usize],
    trials: usize,
) -> Result<Vec<Vec<(f64, f64)>>>
where
    F: Fn(usize) -> Result<SampleSet> + Sync,
{
    let gram = oracle.gram(dictionary.hypotheses())?;
    let class = LocalizedClass::midpoint_differences(&gram)?;
    let per_trial: Vec<Result<Vec<(f64, f64)>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sample = draw(t)?;
            let evals = evaluate(dictionary, &sample)?;
            let columns: Vec<(Vec<f64>, f64)> = class
                .generators()
                .iter()
                .filter(|g| g.norm > 0.0)
                .map(|g| (g.column(&evals).iter().map(|v| v.abs()).collect(), g.norm))
                .collect();
            ell_grid
                .iter()
                .map(|&ell| {
                    let partition = partition_blocks(sample.len(), ell)?;
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for (abs, norm) in &columns {
                        let r = median_of_means(abs, &partition)? / norm;
                        lo = lo.min(r);
                        hi = hi.max(r);
                    }
                    if columns.is_empty() {
                        (lo, hi) = (1.0, 1.0);
                    }
                    Ok((lo, hi))
                })
                .collect()
        })
        .collect();
    let per_trial: Vec<Vec<(f64, f64)>> = per_trial.into_iter().collect::<Result<_>>()?;
    Ok((0..ell_grid.len()).map(|e| per_trial.iter().map(|t| t[e]).collect()).collect())
}

/// The `(alpha, beta)` with smallest `beta / alpha` such that
/// `alpha <= lo_t` and `hi_t <= beta` for at least a `target` fraction of
/// trials.
pub fn tightest_interval(extremes: &[(f64, f64)], target: f64) -> Option<(f64, f64)> {
    let t = extremes.len();
    if t == 0 {
        return None;
    }
    let k = ((target * t as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut best: Option<(f64, f64)> = None;
    for &(alpha, _) in extremes {
        if !(alpha > 0.0) {
            continue;
        }
        let mut his: Vec<f64> = extremes.iter().filter(|(lo, _)| *lo >= alpha).map(|(_, hi)| *hi).collect();
        if his.len() < k {
            continue;
        }
        his.sort_by(f64::total_cmp);
        let beta = his[k - 1];
        let better = match best {
            None => true,
            Some((a, b)) => beta / alpha < b / a || (beta / alpha == b / a && alpha > a),
        };
        if better {
            best = Some((alpha, beta));
        }
    }
    best
}

fn coverage(extremes: &[(f64, f64)], alpha: f64, beta: f64) -> f64 {
    extremes.iter().filter(|(lo, hi)| *lo >= alpha && *hi <= beta).count() as f64 / extremes.len() as f64
}

/// Smallest block length in `ell_grid` (scanned in increasing order) whose
/// tightest covering interval, widened to contain 1, fits inside
/// `[alpha_floor, beta_ceiling]`.
pub fn calibrate_from_draws<F>(
    dictionary: &Dictionary,
    oracle: &RiskOracle,
    draw: F,
    ell_grid: &[usize],
    target_coverage: f64,
    options: &CalibrationOptions,
) -> Result<Calibration>
where
    F: Fn(usize) -> Result<SampleSet> + Sync,
{
    if !(target_coverage > 0.0 && target_coverage <= 1.0) {
        return Err(Error::config("target_coverage", format!("must lie in (0, 1], got {target_coverage}")));
    }
    if ell_grid.is_empty() || ell_grid.contains(&0) {
        return Err(Error::config("ell_grid", "must list positive block lengths"));
    }
    if options.trials == 0 {
        return Err(Error::config("trials", "must be positive"));
    }
    let mut grid = ell_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let extremes = ratio_extremes(dictionary, oracle, draw, &grid, options.trials)?;
    let mut tried = Vec::new();
    for (ell, ext) in grid.iter().zip(&extremes) {
        let Some((alpha, beta)) = tightest_interval(ext, target_coverage) else {
            tried.push(format!("l={ell}: no interval"));
            continue;
        };
        let (alpha, beta) = (alpha.min(1.0), beta.max(1.0));
        if alpha >= options.alpha_floor && beta <= options.beta_ceiling {
            return Ok(Calibration {
                block_len: *ell,
                alpha,
                beta,
                coverage: coverage(ext, alpha, beta),
                trials: options.trials,
            });
        }
        tried.push(format!("l={ell}: alpha={alpha:.4}, beta={beta:.4}"));
    }
    Err(Error::Calibration(format!(
        "no block length reaches coverage {target_coverage} within [{}, {}] ({})",
        options.alpha_floor,
        options.beta_ceiling,
        tried.join("; ")
    )))
}

/// Calibrates on fresh covariate samples of `scenario` at size `options.n`.
pub fn calibrate_mom_constants(
    scenario: &ScenarioSpec,
    ell_grid: &[usize],
    target_coverage: f64,
    options: &CalibrationOptions,
) -> Result<Calibration> {
    scenario.validate()?;
    let dictionary = scenario.dictionary();
    let target = scenario.target(&dictionary, options.n, options.seed);
    let oracle = scenario.oracle_for(target.clone())?;
    let draw = |t: usize| scenario.draw(&target, options.n, derive_seed(options.seed, stream::CALIBRATION, t as u64), stream::SAMPLE);
    calibrate_from_draws(&dictionary, &oracle, draw, ell_grid, target_coverage, options)
}
