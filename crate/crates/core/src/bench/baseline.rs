use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{erm, evaluate, Affine, Dictionary, SampleSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarResult {
    pub f_hat_id: usize,
    pub partner_id: usize,
    /// Weight on `f_hat` in `lambda * f_hat + (1 - lambda) * f`.
    pub lambda: f64,
    pub d2_risk: f64,
    pub hypothesis: Affine,
}

/// Minimizer of `mean((r_f - lambda d)^2)` over `lambda in [0, 1]` with
/// `d = r_f - r_hat`.
pub fn segment_minimizer(r_f: &[f64], r_hat: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in r_f.iter().zip(r_hat) {
        let d = a - b;
        num += a * d;
        den += d * d;
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).clamp(0.0, 1.0)
    }
}

/// Two-stage star algorithm: ERM on the first half gives `f_hat`, then ERM
/// on the second half over the segments between `f_hat` and each member.
pub fn empirical_star_baseline(sample: &SampleSet, dictionary: &Dictionary) -> Result<StarResult> {
    if sample.len() < 4 {
        return Err(Error::config("n", format!("the star baseline needs n >= 4, got {}", sample.len())));
    }
    let evals = evaluate(dictionary, sample)?;
    let half = sample.len() / 2;
    let (y1, y2) = sample.ys().split_at(half);
    let d1 = evals.row_range(0, half);
    let (f_hat_id, _) = erm(&d1.columns().collect::<Vec<_>>(), y1)?;
    let d2 = evals.row_range(half, sample.len());
    let residual = |j: usize| -> Vec<f64> { d2.col(j).iter().zip(y2).map(|(f, y)| f - y).collect() };
    let r_hat = residual(f_hat_id);

    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..dictionary.len() {
        let r_f = residual(j);
        let lambda = segment_minimizer(&r_f, &r_hat);
        let risk = r_f
            .iter()
            .zip(&r_hat)
            .map(|(a, b)| {
                let v = a - lambda * (a - b);
                v * v
            })
            .sum::<f64>()
            / y2.len() as f64;
        if best.is_none_or(|(_, _, r)| risk < r) {
            best = Some((j, lambda, risk));
        }
    }
    let (partner_id, lambda, d2_risk) = best.expect("nonempty dictionary");
    let hypothesis = Affine::combination(&[(lambda, dictionary.get(f_hat_id)), (1.0 - lambda, dictionary.get(partner_id))]);
    Ok(StarResult { f_hat_id, partner_id, lambda, d2_risk, hypothesis })
}
