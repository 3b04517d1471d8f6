use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::class::LocalizedClass;
use crate::error::{Error, Result};
use crate::model::EvaluationMatrix;
use crate::rng::{rng_for, stream};

/// How the sign (or Gaussian) draws are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sampling {
    /// `rounds` independent draws; round `t` uses its own derived seed.
    Random { rounds: usize, seed: u64 },
    /// All `2^N` sign patterns, each once. Only for sign processes, `N <= 24`.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ProcessKind {
    Rademacher,
    Gaussian,
    /// Empirical `(1 - delta)`-quantile of the multiplier process.
    Multiplier { delta: f64 },
}

impl ProcessKind {
    /// Power of `r` in the fixed-point threshold `zeta * r^p * sqrt(N)`.
    pub fn exponent(&self) -> i32 {
        match self {
            ProcessKind::Multiplier { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// Standard error of the Monte Carlo mean; `None` for quantiles and for
    /// exhaustive enumeration.
    pub std_error: Option<f64>,
    pub rounds: usize,
}

/// Per-round magnitudes `|Z_w|` for every generator, reused across radii so
/// that estimates at different `r` share the same draws.
#[derive(Debug, Clone)]
pub struct ProcessDraws {
    kind: ProcessKind,
    exhaustive: bool,
    rounds: usize,
    k: usize,
    abs_z: Vec<f64>,
    inv_norms: Vec<f64>,
}

const MAX_EXHAUSTIVE: usize = 24;

fn round_count(sampling: Sampling, n: usize) -> Result<usize> {
    match sampling {
        Sampling::Random { rounds: 0, .. } => Err(Error::config("mc_rounds", "must be positive")),
        Sampling::Random { rounds, .. } => Ok(rounds),
        Sampling::Exhaustive if n > MAX_EXHAUSTIVE => Err(Error::config(
            "sampling",
            format!("exhaustive enumeration needs N <= {MAX_EXHAUSTIVE}, got {n}"),
        )),
        Sampling::Exhaustive => Ok(1usize << n),
    }
}

fn signs(sampling: Sampling, stream_id: u64, t: usize, n: usize) -> Vec<f64> {
    match sampling {
        Sampling::Exhaustive => (0..n).map(|i| if (t >> i) & 1 == 1 { -1.0 } else { 1.0 }).collect(),
        Sampling::Random { seed, .. } => {
            let mut rng = rng_for(seed, stream_id, t as u64);
            (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
        }
    }
}

fn generator_values(cls: &LocalizedClass, base_sums: &[f64]) -> Vec<f64> {
    cls.generators()
        .iter()
        .map(|g| g.terms.iter().map(|&(j, c)| c * base_sums[j]).sum::<f64>().abs())
        .collect()
}

fn inverse_norms(cls: &LocalizedClass) -> Vec<f64> {
    cls.generators().iter().map(|g| 1.0 / g.norm).collect()
}

impl ProcessDraws {
    /// Draws of `N^{-1/2} sum eps_i w(X_i)` with `base` the dictionary
    /// evaluated on the `N` sample points.
    pub fn rademacher(cls: &LocalizedClass, base: &EvaluationMatrix, sampling: Sampling) -> Result<Self> {
        Self::signed(cls, base, None, sampling, ProcessKind::Rademacher)
    }

    /// Draws of `N^{-1/2} sum eps_i xi_i w(X_i)`.
    pub fn multiplier(
        cls: &LocalizedClass,
        base: &EvaluationMatrix,
        residuals: &[f64],
        delta: f64,
        sampling: Sampling,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::config("delta", format!("must lie in (0, 1), got {delta}")));
        }
        if residuals.len() != base.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} residuals for {} sample points",
                residuals.len(),
                base.rows()
            )));
        }
        Self::signed(cls, base, Some(residuals), sampling, ProcessKind::Multiplier { delta })
    }

    fn signed(
        cls: &LocalizedClass,
        base: &EvaluationMatrix,
        weights: Option<&[f64]>,
        sampling: Sampling,
        kind: ProcessKind,
    ) -> Result<Self> {
        if cls.base_len() != base.cols() {
            return Err(Error::DimensionMismatch(format!(
                "class over {} functions, evaluations for {}",
                cls.base_len(),
                base.cols()
            )));
        }
        let n = base.rows();
        let rounds = round_count(sampling, n)?;
        let stream_id = match kind {
            ProcessKind::Multiplier { .. } => stream::MULTIPLIER,
            _ => stream::RADEMACHER,
        };
        let scale = 1.0 / (n as f64).sqrt();
        let k = cls.len();
        let per_round: Vec<Vec<f64>> = (0..rounds)
            .into_par_iter()
            .map(|t| {
                let mut eps = signs(sampling, stream_id, t, n);
                if let Some(w) = weights {
                    eps.iter_mut().zip(w).for_each(|(e, xi)| *e *= xi);
                }
                let sums: Vec<f64> = base
                    .columns()
                    .map(|col| scale * col.iter().zip(&eps).map(|(v, e)| v * e).sum::<f64>())
                    .collect();
                generator_values(cls, &sums)
            })
            .collect();
        Ok(Self {
            kind,
            exhaustive: matches!(sampling, Sampling::Exhaustive),
            rounds,
            k,
            abs_z: per_round.into_iter().flatten().collect(),
            inv_norms: inverse_norms(cls),
        })
    }

    /// Draws of the canonical Gaussian process indexed by the class, with
    /// covariance given by the `L_2` Gram matrix of the base functions.
    pub fn gaussian(cls: &LocalizedClass, gram: &[Vec<f64>], sampling: Sampling) -> Result<Self> {
        let m = gram.len();
        if cls.base_len() != m || gram.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "class over {} functions, Gram matrix of size {m}",
                cls.base_len()
            )));
        }
        let Sampling::Random { rounds, seed } = sampling else {
            return Err(Error::config("sampling", "the Gaussian process cannot be enumerated"));
        };
        let rounds = round_count(sampling, 0).map(|_| rounds)?;
        let factor = psd_factor(gram)?;
        let k = cls.len();
        let per_round: Vec<Vec<f64>> = (0..rounds)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_for(seed, stream::GAUSSIAN, t as u64);
                let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                let sums: Vec<f64> = (0..m).map(|i| (0..m).map(|j| factor[(i, j)] * g[j]).sum()).collect();
                generator_values(cls, &sums)
            })
            .collect();
        Ok(Self {
            kind: ProcessKind::Gaussian,
            exhaustive: false,
            rounds,
            k,
            abs_z: per_round.into_iter().flatten().collect(),
            inv_norms: inverse_norms(cls),
        })
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn class_len(&self) -> usize {
        self.k
    }

    /// Per-round `sup |Z_w| * min(1/r, 1/||w||)`, i.e. the localized sup
    /// divided by `r`.
    fn round_ratios(&self, r: f64) -> Vec<f64> {
        let inv_r = 1.0 / r;
        if self.k == 0 {
            return vec![0.0; self.rounds];
        }
        self.abs_z
            .chunks_exact(self.k)
            .map(|row| {
                row.iter()
                    .zip(&self.inv_norms)
                    .map(|(z, inv)| if *z == 0.0 { 0.0 } else { z * inv_r.min(*inv) })
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// The summary statistic divided by `r`, with the standard error of that
    /// ratio when it is a Monte Carlo mean. Non-increasing in `r` exactly.
    pub fn ratio(&self, r: f64) -> (f64, Option<f64>) {
        let mut v = self.round_ratios(r);
        let rounds = v.len() as f64;
        match self.kind {
            ProcessKind::Multiplier { delta } => {
                let k = (((1.0 - delta) * rounds) - 1e-9).ceil().max(1.0) as usize;
                let (_, q, _) = v.select_nth_unstable_by(k - 1, f64::total_cmp);
                (*q, None)
            }
            _ => {
                let mean = v.iter().sum::<f64>() / rounds;
                if self.exhaustive || v.len() < 2 {
                    return (mean, None);
                }
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (rounds - 1.0);
                (mean, Some((var / rounds).sqrt()))
            }
        }
    }

    pub fn estimate(&self, r: f64) -> Result<Estimate> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::config("r", format!("radius must be positive and finite, got {r}")));
        }
        let (ratio, se) = self.ratio(r);
        Ok(Estimate { value: ratio * r, std_error: se.map(|s| s * r), rounds: self.rounds })
    }
}

/// A square root `L` with `L L^T = gram`, from the symmetric eigendecomposition.
fn psd_factor(gram: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = gram.len();
    let a = DMatrix::from_fn(m, m, |i, j| 0.5 * (gram[i][j] + gram[j][i]));
    let eig = SymmetricEigen::new(a);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    if let Some(bad) = eig.eigenvalues.iter().find(|&&v| v < -1e-8 * scale) {
        return Err(Error::Numeric(format!("Gram matrix is not positive semidefinite (eigenvalue {bad})")));
    }
    let mut l = eig.eigenvectors.clone();
    for (j, v) in eig.eigenvalues.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    Ok(l)
}

pub fn rademacher_sup(cls: &LocalizedClass, r: f64, base: &EvaluationMatrix, sampling: Sampling) -> Result<Estimate> {
    ProcessDraws::rademacher(cls, base, sampling)?.estimate(r)
}

pub fn gaussian_sup(cls: &LocalizedClass, r: f64, gram: &[Vec<f64>], sampling: Sampling) -> Result<Estimate> {
    ProcessDraws::gaussian(cls, gram, sampling)?.estimate(r)
}

pub fn multiplier_quantile(
    cls: &LocalizedClass,
    r: f64,
    base: &EvaluationMatrix,
    residuals: &[f64],
    delta: f64,
    sampling: Sampling,
) -> Result<Estimate> {
    ProcessDraws::multiplier(cls, base, residuals, delta, sampling)?.estimate(r)
}
