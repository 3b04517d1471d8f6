use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Pareto, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Affine, AnalyticOracle, Dictionary, RiskOracle, SampleSet};
use crate::procedure::AggregationConfig;
use crate::rng::{rng_for, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    Gaussian {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
    },
    /// `X = L z / sqrt(W / nu)` with `z` standard normal and `W ~ chi^2_nu`.
    StudentT {
        dim: usize,
        nu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionarySpec {
    /// Coefficients drawn i.i.d. `N(0, scale^2 / dim)`, no offsets.
    Random { size: usize, scale: f64 },
    /// Members `+scale e_k` and `-scale e_k` for `k < size / 2`.
    Antipodal { size: usize, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    Gaussian { sd: f64 },
    StudentT { dof: f64, scale: f64 },
    /// A random sign times a Pareto variable with minimum `scale`.
    Pareto { shape: f64, scale: f64 },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    RealizableNoise {
        member: usize,
        #[serde(default)]
        noise: NoiseSpec,
    },
    /// `(f_a + f_b)/2 + s (c / sqrt(n)) (f_a - f_b)` with a fair random sign
    /// `s` per replication.
    MidpointAdversarial {
        pair: [usize; 2],
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default)]
        noise: NoiseSpec,
    },
    ConvexCombination {
        weights: Vec<f64>,
        #[serde(default)]
        noise: NoiseSpec,
    },
}

fn default_c() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Procedure,
    Erm,
    Star,
    /// Reports `coef * n^exponent` without touching the data.
    PowerLaw { coef: f64, exponent: f64 },
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Procedure => "procedure",
            MethodSpec::Erm => "erm",
            MethodSpec::Star => "star",
            MethodSpec::PowerLaw { .. } => "power_law",
        }
    }
}

fn default_methods() -> Vec<MethodSpec> {
    vec![MethodSpec::Procedure, MethodSpec::Erm, MethodSpec::Star]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub master_seed: u64,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodSpec>,
    pub design: DesignSpec,
    pub dictionary: DictionarySpec,
    pub target: TargetSpec,
    #[serde(default)]
    pub procedure: AggregationConfig,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::None => Ok(()),
            NoiseSpec::Gaussian { sd } if sd >= 0.0 && sd.is_finite() => Ok(()),
            NoiseSpec::Gaussian { sd } => Err(Error::config("noise.sd", format!("must be nonnegative, got {sd}"))),
            NoiseSpec::StudentT { dof, scale } => {
                if !(dof > 2.0) {
                    return Err(Error::config("noise.dof", format!("a finite variance needs dof > 2, got {dof}")));
                }
                positive("noise.scale", scale)
            }
            NoiseSpec::Pareto { shape, scale } => {
                if !(shape > 2.0) {
                    return Err(Error::config("noise.shape", format!("a finite variance needs shape > 2, got {shape}")));
                }
                positive("noise.scale", scale)
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sd } => sd * sd,
            NoiseSpec::StudentT { dof, scale } => scale * scale * dof / (dof - 2.0),
            NoiseSpec::Pareto { shape, scale } => scale * scale * shape / (shape - 2.0),
        }
    }

    /// Draws one value; parameters must already be validated.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sd } => sd * rng.sample::<f64, _>(StandardNormal),
            NoiseSpec::StudentT { dof, scale } => scale * StudentT::new(dof).expect("validated dof").sample(rng),
            NoiseSpec::Pareto { shape, scale } => {
                let v = Pareto::new(scale, shape).expect("validated Pareto").sample(rng);
                if rng.random::<bool>() {
                    v
                } else {
                    -v
                }
            }
        }
    }
}

impl DesignSpec {
    pub fn dim(&self) -> usize {
        match self {
            DesignSpec::Gaussian { dim, .. } | DesignSpec::StudentT { dim, .. } => *dim,
        }
    }

    fn covariance(&self) -> DMatrix<f64> {
        let (dim, cov) = match self {
            DesignSpec::Gaussian { dim, covariance } | DesignSpec::StudentT { dim, covariance, .. } => (*dim, covariance),
        };
        match cov {
            Some(c) => DMatrix::from_fn(dim, dim, |i, j| c[i][j]),
            None => DMatrix::identity(dim, dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::config("design.dim", "must be positive"));
        }
        if let DesignSpec::StudentT { nu, .. } = self {
            if !(*nu > 2.0) {
                return Err(Error::config("design.nu", format!("a finite covariance needs nu > 2, got {nu}")));
            }
        }
        if let DesignSpec::Gaussian { covariance: Some(c), .. } | DesignSpec::StudentT { covariance: Some(c), .. } = self {
            if c.len() != dim || c.iter().any(|r| r.len() != dim) {
                return Err(Error::config("design.covariance", format!("must be {dim}x{dim}")));
            }
            for i in 0..dim {
                for j in 0..dim {
                    if c[i][j] != c[j][i] {
                        return Err(Error::config("design.covariance", "must be symmetric"));
                    }
                }
            }
            if Cholesky::new(self.covariance()).is_none() {
                return Err(Error::config("design.covariance", "must be positive definite"));
            }
        }
        Ok(())
    }

    /// `E X X^T`.
    pub fn second_moment(&self) -> Vec<Vec<f64>> {
        let factor = match self {
            DesignSpec::Gaussian { .. } => 1.0,
            DesignSpec::StudentT { nu, .. } => nu / (nu - 2.0),
        };
        let c = self.covariance();
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| factor * c[(i, j)]).collect()).collect()
    }

    /// Draws `n` covariate rows, row-major; the design must already be validated.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let dim = self.dim();
        let l = Cholesky::new(self.covariance()).expect("validated covariance").l();
        let chi = match self {
            DesignSpec::StudentT { nu, .. } => Some(ChiSquared::new(*nu).expect("validated nu")),
            DesignSpec::Gaussian { .. } => None,
        };
        let mut out = Vec::with_capacity(n * dim);
        let mut z = vec![0.0; dim];
        for _ in 0..n {
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let s = match (&chi, self) {
                (Some(c), DesignSpec::StudentT { nu, .. }) => (nu / c.sample(rng)).sqrt(),
                _ => 1.0,
            };
            for i in 0..dim {
                let v: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                out.push(s * v);
            }
        }
        out
    }
}

impl DictionarySpec {
    pub fn size(&self) -> usize {
        match self {
            DictionarySpec::Random { size, .. } | DictionarySpec::Antipodal { size, .. } => *size,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let (size, scale) = match self {
            DictionarySpec::Random { size, scale } | DictionarySpec::Antipodal { size, scale } => (*size, *scale),
        };
        if size == 0 {
            return Err(Error::config("dictionary.size", "must be positive"));
        }
        positive("dictionary.scale", scale)?;
        if let DictionarySpec::Antipodal { .. } = self {
            if size % 2 != 0 || size / 2 > dim {
                return Err(Error::config(
                    "dictionary.size",
                    format!("antipodal dictionaries need an even size at most 2 * dim = {}", 2 * dim),
                ));
            }
        }
        Ok(())
    }

    pub fn build(&self, dim: usize, master_seed: u64) -> Dictionary {
        let hyps = match *self {
            DictionarySpec::Random { size, scale } => {
                let mut rng = rng_for(master_seed, stream::DICTIONARY, 0);
                let sd = scale / (dim as f64).sqrt();
                (0..size)
                    .map(|_| Affine::linear((0..dim).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()))
                    .collect()
            }
            DictionarySpec::Antipodal { size, scale } => (0..size)
                .map(|j| {
                    let mut coef = vec![0.0; dim];
                    coef[j / 2] = if j % 2 == 0 { scale } else { -scale };
                    Affine::linear(coef)
                })
                .collect(),
        };
        Dictionary::new(hyps).expect("nonempty dictionary of equal dimensions")
    }
}

/// One generated problem: data, dictionary, and the population oracle.
#[derive(Debug, Clone)]
pub struct Instance {
    pub sample: SampleSet,
    pub dictionary: Dictionary,
    pub oracle: RiskOracle,
    /// Oracle argmin over the dictionary and its risk.
    pub f_star: (usize, f64),
    pub target: Affine,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = crate::io::parse_toml(text, "scenario")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must list at least one sample size"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "must list at least one method"));
        }
        self.procedure.validate()?;
        let dim = self.design.dim();
        self.design.validate()?;
        self.dictionary.validate(dim)?;
        let m = self.dictionary.size();
        let needs_data = self.methods.iter().any(|m| !matches!(m, MethodSpec::PowerLaw { .. }));
        if needs_data {
            if let Some(&n) = self.n_grid.iter().find(|&&n| n < 4 || n < 2 * self.procedure.block_len) {
                return Err(Error::config(
                    "n_grid",
                    format!("sample size {n} is below max(4, 2 * block_len = {})", 2 * self.procedure.block_len),
                ));
            }
        }
        if self.n_grid.contains(&0) {
            return Err(Error::config("n_grid", "sample sizes must be positive"));
        }
        match &self.target {
            TargetSpec::RealizableNoise { member, noise } => {
                if *member >= m {
                    return Err(Error::config("target.member", format!("{member} >= dictionary size {m}")));
                }
                noise.validate()
            }
            TargetSpec::MidpointAdversarial { pair, c, noise } => {
                if pair[0] == pair[1] || pair[0] >= m || pair[1] >= m {
                    return Err(Error::config("target.pair", format!("need two distinct ids below {m}, got {pair:?}")));
                }
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::config("target.c", "must be nonnegative"));
                }
                noise.validate()
            }
            TargetSpec::ConvexCombination { weights, noise } => {
                if weights.len() != m {
                    return Err(Error::config("target.weights", format!("need {m} weights, got {}", weights.len())));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::config("target.weights", "must be nonnegative"));
                }
                noise.validate()
            }
        }
    }

    fn noise(&self) -> NoiseSpec {
        match &self.target {
            TargetSpec::RealizableNoise { noise, .. }
            | TargetSpec::MidpointAdversarial { noise, .. }
            | TargetSpec::ConvexCombination { noise, .. } => *noise,
        }
    }

    /// The dictionary depends only on the master seed, so it is shared
    /// across sample sizes and replications.
    pub fn dictionary(&self) -> Dictionary {
        self.dictionary.build(self.design.dim(), self.master_seed)
    }

    /// Target regression function for sample size `n` and replication seed.
    pub fn target(&self, dictionary: &Dictionary, n: usize, seed: u64) -> Affine {
        match &self.target {
            TargetSpec::RealizableNoise { member, .. } => dictionary.get(*member).clone(),
            TargetSpec::MidpointAdversarial { pair, c, .. } => {
                let (a, b) = (dictionary.get(pair[0]), dictionary.get(pair[1]));
                let s = if rng_for(seed, stream::TARGET_SIGN, 0).random::<bool>() { 1.0 } else { -1.0 };
                let t = s * c / (n as f64).sqrt();
                Affine::combination(&[(0.5 + t, a), (0.5 - t, b)])
            }
            TargetSpec::ConvexCombination { weights, .. } => {
                let terms: Vec<(f64, &Affine)> = weights.iter().copied().zip(dictionary.hypotheses()).collect();
                Affine::combination(&terms)
            }
        }
    }

    pub fn oracle_for(&self, target: Affine) -> Result<RiskOracle> {
        Ok(RiskOracle::Analytic(AnalyticOracle::new(
            self.design.second_moment(),
            target,
            self.noise().second_moment(),
        )?))
    }

    /// Draws `n` labelled points for the given target.
    pub fn draw(&self, target: &Affine, n: usize, seed: u64, stream_id: u64) -> Result<SampleSet> {
        let mut rng = rng_for(seed, stream_id, 0);
        let xs = self.design.sample(n, &mut rng);
        let dim = self.design.dim();
        let noise = self.noise();
        let ys = xs.chunks_exact(dim).map(|x| target.eval(x) + noise.sample(&mut rng)).collect();
        SampleSet::new(dim, xs, ys)
    }
}

/// A reproducible instance of `scenario` with `n` points.
pub fn generate(scenario: &ScenarioSpec, n: usize, replication_seed: u64) -> Result<Instance> {
    scenario.validate()?;
    let dictionary = scenario.dictionary();
    let target = scenario.target(&dictionary, n, replication_seed);
    let oracle = scenario.oracle_for(target.clone())?;
    let sample = scenario.draw(&target, n, replication_seed, stream::SAMPLE)?;
    let f_star = oracle.best_in(&dictionary)?;
    Ok(Instance { sample, dictionary, oracle, f_star, target })
}

/// The default scenario: Gaussian design in 8 dimensions, 8 random
/// hypotheses, realizable target with unit Gaussian noise.
pub fn default_scenario() -> ScenarioSpec {
    ScenarioSpec {
        master_seed: 2024,
        n_grid: vec![2048],
        replications: 500,
        methods: default_methods(),
        design: DesignSpec::Gaussian { dim: 8, covariance: None },
        dictionary: DictionarySpec::Random { size: 8, scale: 1.0 },
        target: TargetSpec::RealizableNoise { member: 0, noise: NoiseSpec::Gaussian { sd: 1.0 } },
        procedure: AggregationConfig::default(),
    }
}
