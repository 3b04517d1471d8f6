//! Samples, dictionaries, evaluation matrices, risks and ERM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An affine hypothesis `x -> <coef, x> + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub coef: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

impl Affine {
    pub fn new(coef: Vec<f64>, offset: f64) -> Self {
        Self { coef, offset }
    }

    pub fn linear(coef: Vec<f64>) -> Self {
        Self { coef, offset: 0.0 }
    }

    pub fn zero(dim: usize) -> Self {
        Self::linear(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.coef.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }

    /// `sum_k w_k * h_k`, accumulated in the given order.
    pub fn combination(terms: &[(f64, &Affine)]) -> Affine {
        let dim = terms.first().map_or(0, |(_, h)| h.dim());
        let mut out = Affine::zero(dim);
        for (w, h) in terms {
            for (o, c) in out.coef.iter_mut().zip(&h.coef) {
                *o += w * c;
            }
            out.offset += w * h.offset;
        }
        out
    }

    pub fn sub(&self, other: &Affine) -> Affine {
        Affine {
            coef: self.coef.iter().zip(&other.coef).map(|(a, b)| a - b).collect(),
            offset: self.offset - other.offset,
        }
    }

    pub fn scale(&self, s: f64) -> Affine {
        Affine {
            coef: self.coef.iter().map(|a| a * s).collect(),
            offset: self.offset * s,
        }
    }
}

/// Paired observations `(x_i, y_i)` with covariates stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != dim * ys.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate values for {} responses of dimension {dim}",
                xs.len(),
                ys.len()
            )));
        }
        if ys.len() < 2 {
            return Err(Error::config("sample", "need at least 2 observations"));
        }
        Ok(Self { dim, xs, ys })
    }

    pub fn from_rows(rows: &[Vec<f64>], ys: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} covariates, expected {dim}",
                rows[bad].len()
            )));
        }
        Self::new(dim, rows.concat(), ys)
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    fn slice(&self, from: usize, to: usize) -> SampleSet {
        SampleSet {
            dim: self.dim,
            xs: self.xs[from * self.dim..to * self.dim].to_vec(),
            ys: self.ys[from..to].to_vec(),
        }
    }

    /// First `floor(n/2)` pairs and the remainder; an odd extra point lands
    /// in the second half.
    pub fn split(&self) -> (SampleSet, SampleSet) {
        let half = self.len() / 2;
        (self.slice(0, half), self.slice(half, self.len()))
    }

    /// Multiplies covariates by `s`, leaving responses unchanged.
    pub fn scale_covariates(&self, s: f64) -> SampleSet {
        SampleSet {
            dim: self.dim,
            xs: self.xs.iter().map(|x| x * s).collect(),
            ys: self.ys.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    hypotheses: Vec<Affine>,
}

impl Dictionary {
    pub fn new(hypotheses: Vec<Affine>) -> Result<Self> {
        let Some(first) = hypotheses.first() else {
            return Err(Error::config("dictionary", "needs at least one hypothesis"));
        };
        let d = first.dim();
        if let Some(bad) = hypotheses.iter().position(|h| h.dim() != d) {
            return Err(Error::DimensionMismatch(format!(
                "hypothesis {bad} has dimension {}, expected {d}",
                hypotheses[bad].dim()
            )));
        }
        Ok(Self { hypotheses })
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.hypotheses[0].dim()
    }

    pub fn get(&self, id: usize) -> &Affine {
        &self.hypotheses[id]
    }

    pub fn hypotheses(&self) -> &[Affine] {
        &self.hypotheses
    }

    pub fn midpoint(&self, mp: Midpoint) -> Affine {
        if mp.j == mp.k {
            return self.hypotheses[mp.j].clone();
        }
        Affine::combination(&[(0.5, &self.hypotheses[mp.j]), (0.5, &self.hypotheses[mp.k])])
    }
}

/// `n x M` matrix of hypothesis values on a sample, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationMatrix {
    n: usize,
    m: usize,
    data: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub sample: String,
    pub dictionary: String,
}

impl EvaluationMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let m = columns.len();
        if m == 0 {
            return Err(Error::config("dictionary", "needs at least one hypothesis"));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch("columns of unequal length".into()));
        }
        let data = columns.concat();
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite evaluation at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        Ok(Self { n, m, data, provenance: Provenance::default() })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n.max(1))
    }

    /// Rows `from..to` of every column.
    pub fn row_range(&self, from: usize, to: usize) -> EvaluationMatrix {
        let columns = (0..self.m).map(|j| self.col(j)[from..to].to_vec()).collect();
        let mut out = EvaluationMatrix::from_columns(columns).expect("sub-block of a valid matrix");
        out.provenance = self.provenance.clone();
        out
    }

    pub fn midpoint_column(&self, mp: Midpoint) -> Vec<f64> {
        if mp.j == mp.k {
            return self.col(mp.j).to_vec();
        }
        self.col(mp.j)
            .iter()
            .zip(self.col(mp.k))
            .map(|(a, b)| (a + b) / 2.0)
            .collect()
    }
}

pub fn evaluate(dictionary: &Dictionary, sample: &SampleSet) -> Result<EvaluationMatrix> {
    if dictionary.dim() != sample.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary dimension {} vs sample dimension {}",
            dictionary.dim(),
            sample.dim()
        )));
    }
    let columns = dictionary
        .hypotheses()
        .iter()
        .map(|h| (0..sample.len()).map(|i| h.eval(sample.x(i))).collect())
        .collect();
    EvaluationMatrix::from_columns(columns)
}

/// A midpoint `(f_j + f_k) / 2` with `j <= k`; `(j, j)` is `f_j` itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Midpoint {
    pub j: usize,
    pub k: usize,
}

impl Midpoint {
    pub fn new(a: usize, b: usize) -> Self {
        Self { j: a.min(b), k: a.max(b) }
    }

    pub fn single(j: usize) -> Self {
        Self { j, k: j }
    }
}

/// All midpoints `(j, k)`, `j <= k < m`, in lexicographic order.
pub fn all_midpoints(m: usize) -> Vec<Midpoint> {
    (0..m).flat_map(|j| (j..m).map(move |k| Midpoint { j, k })).collect()
}

/// `(1/n) * sum (f(x_i) - y_i)^2`.
pub fn empirical_risk(column: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(column.len(), ys.len());
    column.iter().zip(ys).map(|(f, y)| (f - y) * (f - y)).sum::<f64>() / ys.len() as f64
}

/// Index and risk of the candidate with the smallest empirical risk; ties go
/// to the lowest index.
pub fn erm<C: AsRef<[f64]>>(candidates: &[C], ys: &[f64]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (id, c) in candidates.iter().enumerate() {
        let c = c.as_ref();
        if c.len() != ys.len() {
            return Err(Error::DimensionMismatch(format!(
                "candidate {id} has {} values for {} responses",
                c.len(),
                ys.len()
            )));
        }
        let r = empirical_risk(c, ys);
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((id, r));
        }
    }
    best.ok_or(Error::EmptyCandidates)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskValue {
    pub mean: f64,
    /// Zero for the analytic oracle.
    pub std_error: f64,
}

/// Closed-form population risks for `Y = <a*, X> + o* + xi` with centered
/// `X` of second-moment matrix `second_moment` and `xi` independent of `X`,
/// mean zero, with `E xi^2 = noise_second_moment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticOracle {
    pub second_moment: Vec<Vec<f64>>,
    pub target: Affine,
    pub noise_second_moment: f64,
}

impl AnalyticOracle {
    pub fn new(second_moment: Vec<Vec<f64>>, target: Affine, noise_second_moment: f64) -> Result<Self> {
        let d = target.dim();
        if second_moment.len() != d || second_moment.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "second-moment matrix must be {d}x{d}"
            )));
        }
        if !(noise_second_moment >= 0.0) {
            return Err(Error::config("noise_second_moment", "must be nonnegative"));
        }
        Ok(Self { second_moment, target, noise_second_moment })
    }

    /// `E h(X) g(X)`.
    pub fn inner(&self, h: &Affine, g: &Affine) -> f64 {
        let mut s = 0.0;
        for (i, row) in self.second_moment.iter().enumerate() {
            let mut t = 0.0;
            for (j, v) in row.iter().enumerate() {
                t += v * g.coef[j];
            }
            s += h.coef[i] * t;
        }
        s + h.offset * g.offset
    }
}

/// Sample-average risks over an independent oracle sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOracle {
    pub sample: SampleSet,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RiskOracle {
    Analytic(AnalyticOracle),
    MonteCarlo(MonteCarloOracle),
}

fn mean_and_se(values: impl Iterator<Item = f64>) -> RiskValue {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    RiskValue { mean, std_error: (var / n as f64).sqrt() }
}

impl RiskOracle {
    pub fn dim(&self) -> usize {
        match self {
            RiskOracle::Analytic(a) => a.target.dim(),
            RiskOracle::MonteCarlo(m) => m.sample.dim(),
        }
    }

    fn check(&self, h: &Affine) -> Result<()> {
        if h.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "hypothesis dimension {} vs oracle dimension {}",
                h.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `E (h(X) - Y)^2`.
    pub fn risk(&self, h: &Affine) -> Result<RiskValue> {
        self.check(h)?;
        Ok(match self {
            RiskOracle::Analytic(a) => {
                let diff = h.sub(&a.target);
                RiskValue { mean: a.inner(&diff, &diff) + a.noise_second_moment, std_error: 0.0 }
            }
            RiskOracle::MonteCarlo(m) => {
                let s = &m.sample;
                mean_and_se((0..s.len()).map(|i| {
                    let r = h.eval(s.x(i)) - s.ys()[i];
                    r * r
                }))
            }
        })
    }

    /// `E h(X) g(X)`.
    pub fn inner(&self, h: &Affine, g: &Affine) -> Result<f64> {
        self.check(h)?;
        self.check(g)?;
        Ok(match self {
            RiskOracle::Analytic(a) => a.inner(h, g),
            RiskOracle::MonteCarlo(m) => {
                let s = &m.sample;
                (0..s.len()).map(|i| h.eval(s.x(i)) * g.eval(s.x(i))).sum::<f64>() / s.len() as f64
            }
        })
    }

    pub fn l2_norm(&self, h: &Affine) -> Result<f64> {
        Ok(self.inner(h, h)?.max(0.0).sqrt())
    }

    /// `E (u0(X) - Y) w(X)`.
    pub fn residual_cross(&self, u0: &Affine, w: &Affine) -> Result<f64> {
        self.check(u0)?;
        self.check(w)?;
        Ok(match self {
            RiskOracle::Analytic(a) => a.inner(&u0.sub(&a.target), w),
            RiskOracle::MonteCarlo(m) => {
                let s = &m.sample;
                (0..s.len())
                    .map(|i| (u0.eval(s.x(i)) - s.ys()[i]) * w.eval(s.x(i)))
                    .sum::<f64>()
                    / s.len() as f64
            }
        })
    }

    /// `E Y^2`-free Gram matrix `E f_j f_k` of the given functions.
    pub fn gram(&self, fs: &[Affine]) -> Result<Vec<Vec<f64>>> {
        let mut g = vec![vec![0.0; fs.len()]; fs.len()];
        for j in 0..fs.len() {
            for k in j..fs.len() {
                let v = self.inner(&fs[j], &fs[k])?;
                g[j][k] = v;
                g[k][j] = v;
            }
        }
        Ok(g)
    }

    /// Exhaustive argmin of the true risk over the dictionary, lowest id on
    /// ties.
    pub fn best_in(&self, dictionary: &Dictionary) -> Result<(usize, f64)> {
        let mut best = (0, f64::INFINITY);
        for (id, h) in dictionary.hypotheses().iter().enumerate() {
            let r = self.risk(h)?.mean;
            if r < best.1 {
                best = (id, r);
            }
        }
        Ok(best)
    }
}
