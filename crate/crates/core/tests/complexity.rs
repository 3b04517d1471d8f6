use rand::Rng;
use rand_distr::StandardNormal;

use starmid::bench::{generate, DesignSpec, DictionarySpec, MethodSpec, NoiseSpec, ScenarioSpec, TargetSpec};
use starmid::complexity::{
    check_event_a, fixed_point, gaussian_sup, multiplier_quantile, r_opt, rademacher_sup, EventConfig,
    FixedPointOptions, Generator, LocalizedClass, ProcessDraws, RateConstants, RateOptions, Sampling,
};
use starmid::error::Error;
use starmid::model::{Affine, AnalyticOracle, Dictionary, EvaluationMatrix, Midpoint, RiskOracle, SampleSet};
use starmid::procedure::AggregationConfig;
use starmid::rng::rng_for;

fn unit_class() -> LocalizedClass {
    LocalizedClass::new(1, vec![Generator { terms: vec![(0, 1.0)], norm: 1.0 }]).unwrap()
}

fn column(values: Vec<f64>) -> EvaluationMatrix {
    EvaluationMatrix::from_columns(vec![values]).unwrap()
}

fn gaussian_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 900, 0);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `|N^{-1/2} sum eps_i a_i|` for every sign pattern.
fn enumerate_signs(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..1u32 << n)
        .map(|mask| {
            let s: f64 = a.iter().enumerate().map(|(i, v)| if mask & (1 << i) != 0 { -v } else { *v }).sum();
            (s / (n as f64).sqrt()).abs()
        })
        .collect()
}

#[test]
fn rademacher_matches_sign_enumeration() {
    for n in [1, 5, 10, 12] {
        let w = gaussian_values(n, n as u64);
        let exact = enumerate_signs(&w);
        let mean = exact.iter().sum::<f64>() / exact.len() as f64;
        let est = rademacher_sup(&unit_class(), 1.5, &column(w), Sampling::Exhaustive).unwrap();
        assert!((est.value - mean).abs() <= 1e-12 * mean.max(1.0), "n = {n}: {} vs {mean}", est.value);
        assert_eq!(est.rounds, 1 << n);
        assert_eq!(est.std_error, None);
    }
}

#[test]
fn multiplier_quantile_matches_sign_enumeration() {
    let n = 10;
    let w = gaussian_values(n, 3);
    let residuals: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
    let weighted: Vec<f64> = w.iter().zip(&residuals).map(|(a, b)| a * b).collect();
    let mut exact = enumerate_signs(&weighted);
    exact.sort_by(f64::total_cmp);
    for delta in [0.05, 0.1, 0.5] {
        let k = ((1.0 - delta) * exact.len() as f64).ceil() as usize;
        let est = multiplier_quantile(&unit_class(), 2.0, &column(w.clone()), &residuals, delta, Sampling::Exhaustive)
            .unwrap();
        assert!((est.value - exact[k - 1]).abs() <= 1e-12, "delta = {delta}");
    }
}

#[test]
fn multiplier_rejects_delta_outside_unit_interval() {
    for delta in [0.0, 1.0, -0.5] {
        let err = multiplier_quantile(&unit_class(), 1.0, &column(vec![1.0; 4]), &[1.0; 4], delta, Sampling::Exhaustive);
        assert!(matches!(err, Err(Error::InvalidConfig { .. })));
    }
}

#[test]
fn gaussian_single_unit_vector_is_half_normal() {
    let est = gaussian_sup(&unit_class(), 1.0, &[vec![1.0]], Sampling::Random { rounds: 20_000, seed: 1 }).unwrap();
    let truth = (2.0 / std::f64::consts::PI).sqrt();
    let se = est.std_error.unwrap();
    assert!((est.value - truth).abs() <= 4.0 * se, "{} vs {truth} (se {se})", est.value);
}

#[test]
fn gaussian_max_of_orthonormal_family_matches_simulation() {
    let k = 64;
    let gram: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    // w and -w share |Z_w|, so the negations need no generator of their own
    let cls = LocalizedClass::from_base(&gram).unwrap();
    let est = gaussian_sup(&cls, 1.0, &gram, Sampling::Random { rounds: 20_000, seed: 2 }).unwrap();
    // the max over {g_j, -g_j} is max_j |g_j|, simulated directly
    let trials = 20_000;
    let mut rng = rng_for(78, 901, 0);
    let symmetric = (0..trials)
        .map(|_| (0..k).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).fold(0.0, f64::max))
        .sum::<f64>()
        / trials as f64;
    assert!((est.value - symmetric).abs() <= 0.1 * symmetric, "{} vs {symmetric}", est.value);
    assert!((est.value - symmetric).abs() <= 5.0 * est.std_error.unwrap() + 0.02);
}

#[test]
fn empty_class_is_zero_for_every_process() {
    let empty = LocalizedClass::new(1, vec![]).unwrap();
    let base = column(vec![1.0, -2.0, 0.5]);
    for r in [1e-3, 1.0, 10.0] {
        assert_eq!(rademacher_sup(&empty, r, &base, Sampling::Exhaustive).unwrap().value, 0.0);
        assert_eq!(gaussian_sup(&empty, r, &[vec![1.0]], Sampling::Random { rounds: 10, seed: 0 }).unwrap().value, 0.0);
        let q = multiplier_quantile(&empty, r, &base, &[1.0, 1.0, 1.0], 0.1, Sampling::Exhaustive).unwrap();
        assert_eq!(q.value, 0.0);
    }
}

#[test]
fn scaling_covariates_scales_the_estimate() {
    let w = gaussian_values(40, 9);
    let sampling = Sampling::Random { rounds: 300, seed: 4 };
    let base = rademacher_sup(&unit_class(), 5.0, &column(w.clone()), sampling).unwrap().value;
    for lambda in [0.5, 2.0, 8.0] {
        let scaled = column(w.iter().map(|v| v * lambda).collect());
        let est = rademacher_sup(&unit_class(), 5.0, &scaled, sampling).unwrap().value;
        assert!((est - lambda * base).abs() <= 1e-12 * est, "lambda = {lambda}");
    }
}

#[test]
fn homogeneity_under_joint_scaling() {
    let m = 4;
    let gram: Vec<Vec<f64>> =
        (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.3 }).collect()).collect();
    let cls = LocalizedClass::midpoint_differences(&gram).unwrap();
    let cols: Vec<Vec<f64>> = (0..m).map(|j| gaussian_values(30, 20 + j as u64)).collect();
    let base = EvaluationMatrix::from_columns(cols.clone()).unwrap();
    let sampling = Sampling::Random { rounds: 200, seed: 8 };
    let residuals = gaussian_values(30, 40);
    for lambda in [0.25, 3.0] {
        let scaled_base = EvaluationMatrix::from_columns(
            cols.iter().map(|c| c.iter().map(|v| v * lambda).collect()).collect(),
        )
        .unwrap();
        let scaled_gram: Vec<Vec<f64>> = gram.iter().map(|r| r.iter().map(|v| v * lambda * lambda).collect()).collect();
        let scaled_cls = cls.scaled(lambda);
        for r in [0.05, 0.4, 2.0] {
            let pairs = [
                (
                    rademacher_sup(&cls, r, &base, sampling).unwrap().value,
                    rademacher_sup(&scaled_cls, lambda * r, &base, sampling).unwrap().value,
                ),
                (
                    multiplier_quantile(&cls, r, &base, &residuals, 0.1, sampling).unwrap().value,
                    multiplier_quantile(&scaled_cls, lambda * r, &base, &residuals, 0.1, sampling).unwrap().value,
                ),
                (
                    gaussian_sup(&cls, r, &gram, sampling).unwrap().value,
                    gaussian_sup(&LocalizedClass::midpoint_differences(&scaled_gram).unwrap(), lambda * r, &scaled_gram, sampling)
                        .unwrap()
                        .value,
                ),
            ];
            for (i, (a, b)) in pairs.iter().enumerate() {
                assert!((b - lambda * a).abs() <= 1e-9 * b.abs().max(1e-12), "process {i}, r = {r}: {b} vs {}", lambda * a);
            }
            // scaling the covariates instead of the coefficients
            let via_data = rademacher_sup(&cls.scaled(lambda), lambda * r, &scaled_base, sampling).unwrap().value;
            let direct = rademacher_sup(&cls, r, &base, sampling).unwrap().value;
            assert!((via_data - lambda * lambda * direct).abs() <= 1e-9 * via_data);
        }
    }
}

#[test]
fn estimate_is_linear_in_small_radii() {
    let draws = ProcessDraws::rademacher(&unit_class(), &column(gaussian_values(25, 5)), Sampling::Random { rounds: 100, seed: 1 })
        .unwrap();
    let a = draws.estimate(1e-3).unwrap().value;
    for r in [1e-4, 1e-6, 1e-9] {
        let b = draws.estimate(r).unwrap().value;
        assert!((b / r - a / 1e-3).abs() <= 1e-9 * (a / 1e-3));
    }
    assert!(draws.estimate(0.0).is_err());
}

#[test]
fn fixed_point_with_one_observation_is_decided_at_the_endpoints() {
    let opts = FixedPointOptions::new(1e-3, 10.0, 0.02).unwrap();
    // |Z| = 0.5 at every radius below the norm: the condition holds at r_min
    let small = ProcessDraws::rademacher(&unit_class(), &column(vec![0.5]), Sampling::Exhaustive).unwrap();
    let fp = fixed_point(&small, 1.0, 1, &opts).unwrap();
    assert_eq!(fp.r, opts.r_min);
    // |Z| = 30 never drops below r once r <= 10
    let large = ProcessDraws::rademacher(&unit_class(), &column(vec![30.0]), Sampling::Exhaustive).unwrap();
    assert!(matches!(fixed_point(&large, 1.0, 1, &opts), Err(Error::FixedPointUnmet { .. })));
    // |Z| = 3: the smallest grid radius with 3 <= r
    let mid = ProcessDraws::rademacher(&unit_class(), &column(vec![3.0]), Sampling::Exhaustive).unwrap();
    let fp = fixed_point(&mid, 1.0, 1, &opts).unwrap();
    let step = (1.0f64 + 0.02).ln();
    let i = ((3.0f64 / 1e-3).ln() / step).ceil();
    let expect = (1..=3).map(|d| 1e-3 * (step * (i - 2.0 + f64::from(d))).exp()).find(|r| *r >= 3.0).unwrap();
    assert!((fp.r - expect).abs() <= 1e-9 * expect, "{} vs {expect}", fp.r);
    assert!(fp.r / 1.02 < 3.0);
}

#[test]
fn doubling_zeta_never_increases_the_radius() {
    let m = 5;
    let gram: Vec<Vec<f64>> =
        (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 + i as f64 } else { 0.2 }).collect()).collect();
    let cls = LocalizedClass::midpoint_differences(&gram).unwrap();
    let base =
        EvaluationMatrix::from_columns((0..m).map(|j| gaussian_values(64, 60 + j as u64)).collect()).unwrap();
    let draws = ProcessDraws::rademacher(&cls, &base, Sampling::Random { rounds: 200, seed: 3 }).unwrap();
    let opts = FixedPointOptions::new(1e-5, 1e4, 0.02).unwrap();
    let mut zeta = 1e-3;
    let mut last = f64::INFINITY;
    while zeta < 10.0 {
        let fp = fixed_point(&draws, zeta, 64, &opts).unwrap();
        assert!(fp.r <= last, "zeta = {zeta}");
        assert!(fp.estimate_at_r <= zeta * fp.r * 8.0 * (1.0 + 1e-12));
        last = fp.r;
        zeta *= 2.0;
    }
}

fn gaussian_scenario(size: usize, target: TargetSpec, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        master_seed: seed,
        n_grid: vec![256],
        replications: 1,
        methods: vec![MethodSpec::Erm],
        design: DesignSpec::Gaussian { dim: 8, covariance: None },
        dictionary: DictionarySpec::Random { size, scale: 1.0 },
        target,
        procedure: AggregationConfig::default(),
    }
}

fn quick() -> RateOptions {
    RateOptions { mc_rounds: 300, ..RateOptions::default() }
}

#[test]
fn singleton_dictionary_has_zero_rate() {
    let s = gaussian_scenario(1, TargetSpec::RealizableNoise { member: 0, noise: NoiseSpec::Gaussian { sd: 1.0 } }, 1);
    let inst = generate(&s, 128, 3).unwrap();
    let rate = r_opt(&inst.dictionary, &inst.sample, &inst.oracle, RateConstants::from_calibration(0.25, 4.0, 3), &quick())
        .unwrap();
    assert_eq!(rate.r_opt, 0.0);
}

#[test]
fn noiseless_center_at_target_has_trivial_multiplier_term() {
    let s = gaussian_scenario(4, TargetSpec::RealizableNoise { member: 2, noise: NoiseSpec::None }, 2);
    let inst = generate(&s, 256, 5).unwrap();
    let rate = r_opt(&inst.dictionary, &inst.sample, &inst.oracle, RateConstants::from_calibration(0.25, 4.0, 3), &quick())
        .unwrap();
    let at_target = rate.r_m.iter().find(|c| c.center == Midpoint::single(2)).unwrap();
    assert_eq!(at_target.fixed_point.estimate_at_r, 0.0);
    assert_eq!(at_target.fixed_point.solver_trace.iter().filter(|s| !s.satisfied).count(), 0);
    let r_min = at_target.fixed_point.solver_trace.iter().map(|s| s.r).fold(f64::INFINITY, f64::min);
    assert_eq!(at_target.fixed_point.r, r_min);
    let sup_m = rate.r_m.iter().map(|c| c.fixed_point.r.powi(2)).fold(0.0, f64::max);
    let expect = 2.0 * rate.r_q1.r.powi(2).max(rate.r_q2.r.powi(2)).max(sup_m);
    assert_eq!(rate.r_opt, expect);
}

#[test]
fn optimistic_rate_scales_like_inverse_sample_size() {
    let s = gaussian_scenario(8, TargetSpec::RealizableNoise { member: 0, noise: NoiseSpec::Gaussian { sd: 1.0 } }, 3);
    // slopes chosen so that every fixed point sits in its 1/N regime
    let constants = RateConstants { c1: 10.0, c2: 1e-3, c3: 1e-3 };
    let options = RateOptions { mc_rounds: 400, ..RateOptions::default() };
    let points: Vec<(f64, f64)> = [256usize, 512, 1024, 2048, 4096]
        .iter()
        .map(|&n| {
            let inst = generate(&s, n, 11).unwrap();
            let rate = r_opt(&inst.dictionary, &inst.sample, &inst.oracle, constants, &options).unwrap();
            ((n as f64).ln(), rate.r_opt.ln())
        })
        .collect();
    let (slope, _, _) = starmid::bench::fit_slope(&points);
    assert!((slope + 1.0).abs() <= 0.15, "slope {slope}, points {points:?}");
    let first = points[0].1.exp() * 256.0;
    for (ln_n, ln_r) in &points {
        let scaled = ln_r.exp() * ln_n.exp();
        assert!(scaled <= 2.0 * first && scaled >= first / 2.0, "r_opt * N = {scaled} vs {first}");
    }
}

#[test]
fn optimistic_rate_is_invariant_to_relabeling() {
    let dim = 3;
    let coefs = [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.5], vec![-0.5, 0.2, 1.0]];
    let target = Affine::linear(vec![0.2, 0.5, 0.3]);
    let mut rng = rng_for(12, 902, 0);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let ys: Vec<f64> = rows.iter().map(|x| target.eval(x) + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    let sample = SampleSet::from_rows(&rows, ys).unwrap();
    let identity: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let oracle = RiskOracle::Analytic(AnalyticOracle::new(identity, target, 0.25).unwrap());
    let constants = RateConstants::from_calibration(0.5, 2.0, 3);
    let options = RateOptions { mc_rounds: 4000, ..RateOptions::default() };
    let run = |order: &[usize]| {
        let dict = Dictionary::new(order.iter().map(|&i| Affine::linear(coefs[i].clone())).collect()).unwrap();
        r_opt(&dict, &sample, &oracle, constants, &options).unwrap()
    };
    let a = run(&[0, 1, 2]);
    for order in [[2, 0, 1], [1, 2, 0], [2, 1, 0]] {
        let b = run(&order);
        assert!((a.r_q2.r - b.r_q2.r).abs() <= 1e-9 * a.r_q2.r);
        let sup = |r: &starmid::complexity::OptimisticRate| r.r_m.iter().map(|c| c.fixed_point.r).fold(0.0, f64::max);
        assert!((sup(&a) - sup(&b)).abs() <= 1e-9 * sup(&a));
        // Gaussian draws depend on the factorisation of the relabeled Gram
        // matrix, so that term only agrees up to Monte Carlo error
        assert!((a.r_q1.r - b.r_q1.r).abs() <= 0.1 * a.r_q1.r, "{} vs {}", a.r_q1.r, b.r_q1.r);
        assert!((a.r_opt - b.r_opt).abs() <= 0.25 * a.r_opt);
    }
}

#[test]
fn event_bullets_are_vacuous_without_differences() {
    let config = EventConfig { r_u: 0.1, rho: 0.2, alpha: 0.25, beta: 4.0, block_len: 3 };
    for dict in [
        Dictionary::new(vec![Affine::linear(vec![1.0, -1.0])]).unwrap(),
        Dictionary::new(vec![Affine::linear(vec![1.0, -1.0]); 3]).unwrap(),
        Dictionary::new(vec![Affine::new(vec![0.0, 0.0], 2.0); 2]).unwrap(),
    ] {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        let ys: Vec<f64> = rows.iter().map(|x| x[0] + 0.1 * x[1]).collect();
        let sample = SampleSet::from_rows(&rows, ys).unwrap();
        let oracle = RiskOracle::Analytic(
            AnalyticOracle::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], Affine::linear(vec![1.0, 0.1]), 0.0).unwrap(),
        );
        let report = check_event_a(&sample, &dict, Midpoint::single(0), &oracle, &config).unwrap();
        assert!(report.all_pass);
        assert_eq!(report.isometry.checked, 0);
        assert_eq!(report.median.checked, 0);
        assert!(report.isometry.worst_margin.is_none());
        // every midpoint coincides with the center: a zero deviation against a
        // nonnegative bound
        assert_eq!(report.multiplier.checked, dict.len() * (dict.len() + 1) / 2);
        assert!(report.multiplier.worst_margin.unwrap() >= 0.0);
    }
}
