//! Truncation at a moment-calibrated level and trimmed second moments.
//!
//! The level for a function `f` observed on `n` points is
//! `(n/m)^(1/q) * ||f||_{L_q}`; values beyond it are clipped to `level * sign`.
//! The survivor set collects the indices left untouched by the clipping.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivation {
    Explicit,
    Moment { n: usize, m: usize, q: f64, lq_norm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    level: f64,
    derivation: Derivation,
}

impl TruncationSpec {
    /// An explicit clipping level; `f64::INFINITY` disables truncation.
    pub fn explicit(level: f64) -> Result<Self> {
        if level.is_nan() || level < 0.0 {
            return Err(Error::config("level", format!("{level} is not a nonnegative level")));
        }
        Ok(Self { level, derivation: Derivation::Explicit })
    }

    pub fn none() -> Self {
        Self { level: f64::INFINITY, derivation: Derivation::Explicit }
    }

    pub fn from_moment(n: usize, m: usize, q: f64, lq_norm: f64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::config("m", format!("need 1 <= m <= n, got m={m}, n={n}")));
        }
        if !(q > 2.0) {
            return Err(Error::config("q", format!("moment order must exceed 2, got {q}")));
        }
        if lq_norm.is_nan() || lq_norm < 0.0 {
            return Err(Error::config("lq_norm", "must be nonnegative"));
        }
        if q > 4.0 {
            log::warn!("truncation with q = {q} > 4 lies outside the range 2 < q <= 4 of the sandwich bound");
        }
        let level = (n as f64 / m as f64).powf(1.0 / q) * lq_norm;
        Ok(Self { level, derivation: Derivation::Moment { n, m, q, lq_norm } })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn derivation(&self) -> Derivation {
        self.derivation
    }

    /// True when the level was derived with `q > 4`.
    pub fn outside_sandwich_range(&self) -> bool {
        matches!(self.derivation, Derivation::Moment { q, .. } if q > 4.0)
    }
}

pub fn truncate(values: &[f64], spec: &TruncationSpec) -> Vec<f64> {
    let level = spec.level;
    values
        .iter()
        .map(|&v| if v.abs() <= level { v } else { level.copysign(v) })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurvivorSet {
    pub indices: Vec<usize>,
    /// Size of the complement in `0..n`.
    pub excluded: usize,
}

pub fn survivor_set(values: &[f64], spec: &TruncationSpec) -> SurvivorSet {
    let indices: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= spec.level)
        .map(|(i, _)| i)
        .collect();
    let excluded = values.len() - indices.len();
    SurvivorSet { indices, excluded }
}

/// `(1/n) * sum of v_i^2` over survivors not in `excluded`.
///
/// The divisor is the full length `n`, not the number of summed terms.
pub fn trimmed_second_moment(values: &[f64], spec: &TruncationSpec, excluded: &[usize]) -> Result<f64> {
    let n = values.len();
    let mut skip = vec![false; n];
    for &j in excluded {
        if j >= n {
            return Err(Error::DimensionMismatch(format!("excluded index {j} >= n = {n}")));
        }
        skip[j] = true;
    }
    let sum: f64 = values
        .iter()
        .zip(&skip)
        .filter(|(v, s)| !**s && v.abs() <= spec.level)
        .map(|(v, _)| v * v)
        .sum();
    Ok(sum / n as f64)
}

/// Indices of the `k` largest magnitudes, ties broken by lower index.
///
/// This is the worst-case choice of `J` for the lower side of the sandwich.
pub fn top_magnitude_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
