use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{all_midpoints, EvaluationMatrix, Midpoint};

/// A generator `w = sum_j c_j f_j` of a star-shaped class, with its `L_2`
/// norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub terms: Vec<(usize, f64)>,
    pub norm: f64,
}

impl Generator {
    /// Values of the generator on the rows of `base`.
    pub fn column(&self, base: &EvaluationMatrix) -> Vec<f64> {
        let mut out = vec![0.0; base.rows()];
        for &(j, c) in &self.terms {
            for (o, v) in out.iter_mut().zip(base.col(j)) {
                *o += c * v;
            }
        }
        out
    }
}

/// The star-shaped hull of finitely many generators, intersected with a ball
/// of radius `r` at evaluation time. The zero function is always a member;
/// it is represented by the absence of a generator, and generators with
/// zero norm are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedClass {
    base_len: usize,
    generators: Vec<Generator>,
}

fn norm_from_gram(terms: &[(usize, f64)], gram: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for &(a, ca) in terms {
        for &(b, cb) in terms {
            s += ca * cb * gram[a][b];
        }
    }
    s.max(0.0).sqrt()
}

fn midpoint_terms(mp: Midpoint) -> Vec<(usize, f64)> {
    if mp.j == mp.k {
        vec![(mp.j, 1.0)]
    } else {
        vec![(mp.j, 0.5), (mp.k, 0.5)]
    }
}

/// Dense coefficients of `u1 - u2` in units of 1/2, normalised so that the
/// first nonzero entry is positive (`w` and `-w` index the same terms of
/// `|Z_w|`).
fn difference_key(m: usize, u1: Midpoint, u2: Midpoint) -> Vec<i8> {
    let mut key = vec![0i8; m];
    for (j, c) in midpoint_terms(u1) {
        key[j] += (2.0 * c) as i8;
    }
    for (j, c) in midpoint_terms(u2) {
        key[j] -= (2.0 * c) as i8;
    }
    if key.iter().find(|&&k| k != 0).is_some_and(|&k| k < 0) {
        key.iter_mut().for_each(|k| *k = -*k);
    }
    key
}

fn check_gram(m: usize, gram: &[Vec<f64>]) -> Result<()> {
    if gram.len() != m || gram.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch(format!("Gram matrix must be {m}x{m}")));
    }
    Ok(())
}

impl LocalizedClass {
    pub fn new(base_len: usize, generators: Vec<Generator>) -> Result<Self> {
        if let Some(g) = generators.iter().find(|g| g.terms.iter().any(|&(j, _)| j >= base_len)) {
            return Err(Error::DimensionMismatch(format!(
                "generator {:?} references a function outside 0..{base_len}",
                g.terms
            )));
        }
        if generators.iter().any(|g| !(g.norm >= 0.0 && g.norm.is_finite())) {
            return Err(Error::Numeric("generator norms must be finite and nonnegative".into()));
        }
        // a generator of norm zero is the zero function almost surely
        let generators = generators.into_iter().filter(|g| !g.terms.is_empty() && g.norm > 0.0).collect();
        Ok(Self { base_len, generators })
    }

    /// Each base function is a generator.
    pub fn from_base(gram: &[Vec<f64>]) -> Result<Self> {
        let m = gram.len();
        check_gram(m, gram)?;
        let gens = (0..m)
            .map(|j| Generator { terms: vec![(j, 1.0)], norm: gram[j][j].max(0.0).sqrt() })
            .collect();
        Self::new(m, gens)
    }

    /// `star(U - U)` for `U` the midpoints of an `m`-element dictionary.
    pub fn midpoint_differences(gram: &[Vec<f64>]) -> Result<Self> {
        let m = gram.len();
        check_gram(m, gram)?;
        let u = all_midpoints(m);
        let mut seen = BTreeSet::new();
        let mut gens = Vec::new();
        for (a, &u1) in u.iter().enumerate() {
            for &u2 in &u[a + 1..] {
                let key = difference_key(m, u1, u2);
                if key.iter().all(|&k| k == 0) || !seen.insert(key.clone()) {
                    continue;
                }
                let terms: Vec<(usize, f64)> = key
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k != 0)
                    .map(|(j, &k)| (j, f64::from(k) / 2.0))
                    .collect();
                let norm = norm_from_gram(&terms, gram);
                gens.push(Generator { terms, norm });
            }
        }
        Self::new(m, gens)
    }

    /// `star(U - u0)`.
    pub fn star_around(gram: &[Vec<f64>], u0: Midpoint) -> Result<Self> {
        let m = gram.len();
        check_gram(m, gram)?;
        if u0.k >= m {
            return Err(Error::DimensionMismatch(format!("midpoint {u0:?} outside a dictionary of {m}")));
        }
        let mut gens = Vec::new();
        for u in all_midpoints(m) {
            let mut dense = vec![0.0; m];
            for (j, c) in midpoint_terms(u) {
                dense[j] += c;
            }
            for (j, c) in midpoint_terms(u0) {
                dense[j] -= c;
            }
            let terms: Vec<(usize, f64)> = dense.into_iter().enumerate().filter(|(_, c)| *c != 0.0).collect();
            if terms.is_empty() {
                continue;
            }
            let norm = norm_from_gram(&terms, gram);
            gens.push(Generator { terms, norm });
        }
        Self::new(m, gens)
    }

    pub fn base_len(&self) -> usize {
        self.base_len
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.generators.iter().map(|g| g.norm).fold(0.0, f64::max)
    }

    /// Multiplies every generator (and its norm) by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            base_len: self.base_len,
            generators: self
                .generators
                .iter()
                .map(|g| Generator {
                    terms: g.terms.iter().map(|&(j, c)| (j, c * s)).collect(),
                    norm: g.norm * s,
                })
                .collect(),
        }
    }
}
