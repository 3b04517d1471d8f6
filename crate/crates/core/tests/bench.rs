use proptest::prelude::*;

use starmid::bench::{
    calibrate_from_draws, calibrate_mom_constants, default_scenario, empirical_star_baseline, generate,
    ratio_extremes, replication_seed, run_experiment, segment_minimizer, CalibrationOptions, DesignSpec,
    DictionarySpec, MethodSpec, NoiseSpec, ScenarioSpec, TargetSpec,
};
use starmid::error::Error;
use starmid::model::{empirical_risk, evaluate, Affine, Dictionary, MonteCarloOracle, RiskOracle, SampleSet};
use starmid::procedure::AggregationConfig;
use starmid::rng::{derive_seed, stream};

fn scenario(dictionary: DictionarySpec, target: TargetSpec, methods: Vec<MethodSpec>) -> ScenarioSpec {
    ScenarioSpec {
        master_seed: 5,
        n_grid: vec![64, 128, 256],
        replications: 20,
        methods,
        design: DesignSpec::Gaussian { dim: 4, covariance: None },
        dictionary,
        target,
        procedure: AggregationConfig { block_len: 3, ..AggregationConfig::default() },
    }
}

fn noiseless(size: usize, member: usize) -> ScenarioSpec {
    scenario(
        DictionarySpec::Random { size, scale: 1.0 },
        TargetSpec::RealizableNoise { member, noise: NoiseSpec::None },
        vec![MethodSpec::Procedure, MethodSpec::Erm, MethodSpec::Star],
    )
}

#[test]
fn same_seed_gives_identical_instances() {
    let s = default_scenario();
    let a = generate(&s, 100, 42).unwrap();
    let b = generate(&s, 100, 42).unwrap();
    assert_eq!(a.sample, b.sample);
    assert_eq!(a.dictionary, b.dictionary);
    assert_eq!(a.f_star, b.f_star);
    assert_ne!(a.sample, generate(&s, 100, 43).unwrap().sample);
}

#[test]
fn noiseless_realizable_target_has_zero_risk() {
    let inst = generate(&noiseless(6, 4), 50, 1).unwrap();
    assert_eq!(inst.f_star, (4, 0.0));
    let evals = evaluate(&inst.dictionary, &inst.sample).unwrap();
    assert_eq!(empirical_risk(evals.col(4), inst.sample.ys()), 0.0);
}

#[test]
fn unperturbed_midpoint_target_ties_its_endpoints() {
    let s = scenario(
        DictionarySpec::Random { size: 5, scale: 1.0 },
        TargetSpec::MidpointAdversarial { pair: [1, 3], c: 0.0, noise: NoiseSpec::Gaussian { sd: 0.5 } },
        vec![MethodSpec::Erm],
    );
    let inst = generate(&s, 64, 9).unwrap();
    let r1 = inst.oracle.risk(inst.dictionary.get(1)).unwrap().mean;
    let r3 = inst.oracle.risk(inst.dictionary.get(3)).unwrap().mean;
    assert!((r1 - r3).abs() <= 1e-12 * r1);
}

#[test]
fn midpoint_symmetry_under_exchange() {
    let make = |pair| {
        scenario(
            DictionarySpec::Random { size: 6, scale: 1.0 },
            TargetSpec::MidpointAdversarial { pair, c: 0.0, noise: NoiseSpec::Gaussian { sd: 1.0 } },
            vec![MethodSpec::Procedure, MethodSpec::Erm, MethodSpec::Star],
        )
    };
    let a = run_experiment(&make([0, 2])).unwrap();
    let b = run_experiment(&make([2, 0])).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.summary, b.summary);
}

#[test]
fn analytic_and_monte_carlo_oracles_agree() {
    for (k, s) in [
        default_scenario(),
        scenario(
            DictionarySpec::Random { size: 4, scale: 2.0 },
            TargetSpec::ConvexCombination { weights: vec![0.1, 0.2, 0.3, 0.4], noise: NoiseSpec::StudentT { dof: 5.0, scale: 1.0 } },
            vec![MethodSpec::Erm],
        ),
    ]
    .iter()
    .enumerate()
    {
        let inst = generate(s, 64, 3).unwrap();
        let big = s.draw(&inst.target, 200_000, derive_seed(k as u64, stream::ORACLE, 0), stream::ORACLE).unwrap();
        let mc = RiskOracle::MonteCarlo(MonteCarloOracle { sample: big, seed: k as u64 });
        for h in inst.dictionary.hypotheses() {
            let exact = inst.oracle.risk(h).unwrap().mean;
            let est = mc.risk(h).unwrap();
            assert!((est.mean - exact).abs() <= 3.0 * est.std_error, "{} vs {exact} (se {})", est.mean, est.std_error);
        }
    }
}

proptest! {
    #[test]
    fn segment_minimizer_matches_grid_search(
        pair in (2usize..30).prop_flat_map(|n| (prop::collection::vec(-5f64..5.0, n), prop::collection::vec(-5f64..5.0, n)))
    ) {
        let (r_f, r_hat) = pair;
        let loss = |l: f64| r_f.iter().zip(&r_hat).map(|(a, b)| (a - l * (a - b)).powi(2)).sum::<f64>();
        let lambda = segment_minimizer(&r_f, &r_hat);
        prop_assert!((0.0..=1.0).contains(&lambda));
        let grid_best = (0..=10_000).map(|i| f64::from(i) * 1e-4).map(loss).fold(f64::INFINITY, f64::min);
        prop_assert!(loss(lambda) <= grid_best + 1e-12 * grid_best.max(1.0));
        let grid_arg = (0..=10_000).map(|i| f64::from(i) * 1e-4).min_by(|a, b| loss(*a).total_cmp(&loss(*b))).unwrap();
        prop_assert!((grid_arg - lambda).abs() <= 1e-4 + 1e-9 || (loss(grid_arg) - loss(lambda)).abs() <= 1e-12);
    }
}

#[test]
fn degenerate_segment_is_a_single_point() {
    assert_eq!(segment_minimizer(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
}

#[test]
fn star_with_one_member_returns_it() {
    let dict = Dictionary::new(vec![Affine::new(vec![1.0, -2.0], 0.5)]).unwrap();
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
    let sample = SampleSet::from_rows(&rows, (0..10).map(|i| i as f64).collect()).unwrap();
    let res = empirical_star_baseline(&sample, &dict).unwrap();
    assert_eq!((res.f_hat_id, res.partner_id), (0, 0));
    assert_eq!(res.hypothesis, *dict.get(0));
    let short = SampleSet::from_rows(&rows[..3], vec![0.0; 3]).unwrap();
    assert!(matches!(empirical_star_baseline(&short, &dict), Err(Error::InvalidConfig { .. })));
}

#[test]
fn star_interpolates_noiseless_data() {
    let s = noiseless(8, 3);
    for r in 0..10 {
        let inst = generate(&s, 40, r).unwrap();
        let res = empirical_star_baseline(&inst.sample, &inst.dictionary).unwrap();
        assert!(res.d2_risk <= 1e-20, "replication {r}: {}", res.d2_risk);
    }
}

#[test]
fn star_never_loses_to_the_dictionary_on_the_second_half() {
    let s = default_scenario();
    for r in 0..30 {
        let inst = generate(&s, 101, r).unwrap();
        let res = empirical_star_baseline(&inst.sample, &inst.dictionary).unwrap();
        let evals = evaluate(&inst.dictionary, &inst.sample).unwrap();
        let half = inst.sample.len() / 2;
        let d2 = evals.row_range(half, inst.sample.len());
        let y2 = &inst.sample.ys()[half..];
        let best = d2.columns().map(|c| empirical_risk(c, y2)).fold(f64::INFINITY, f64::min);
        assert!(res.d2_risk <= best * (1.0 + 1e-12));
        // the reported hypothesis reproduces the reported risk
        let col: Vec<f64> = (half..inst.sample.len()).map(|i| res.hypothesis.eval(inst.sample.x(i))).collect();
        assert!((empirical_risk(&col, y2) - res.d2_risk).abs() <= 1e-9 * res.d2_risk.max(1.0));
    }
}

#[test]
fn power_law_stub_is_fitted_exactly() {
    let mut s = default_scenario();
    s.methods = vec![MethodSpec::PowerLaw { coef: 4.0, exponent: -1.0 }];
    s.n_grid = vec![64, 128, 256, 512, 1024];
    s.replications = 3;
    let report = run_experiment(&s).unwrap();
    let slope = report.slope_for("power_law").unwrap();
    assert!((slope.slope + 1.0).abs() <= 1e-9);
    assert!((slope.intercept - 4f64.ln()).abs() <= 1e-9);
}

#[test]
fn noiseless_realizable_procedure_has_zero_excess() {
    let report = run_experiment(&noiseless(16, 7)).unwrap();
    for row in report.rows.iter().filter(|r| r.method != "star") {
        assert!(row.excess_risk.abs() <= 1e-12, "{row:?}");
    }
}

#[test]
fn erm_excess_is_never_negative_and_reports_are_reproducible() {
    let s = scenario(
        DictionarySpec::Random { size: 6, scale: 1.0 },
        TargetSpec::ConvexCombination { weights: vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0], noise: NoiseSpec::Pareto { shape: 3.0, scale: 1.0 } },
        vec![MethodSpec::Procedure, MethodSpec::Erm, MethodSpec::Star],
    );
    let a = run_experiment(&s).unwrap();
    assert!(a.rows.iter().filter(|r| r.method == "erm").all(|r| r.excess_risk >= 0.0));
    assert_eq!(a.rows.len(), 3 * 3 * 20);
    let b = run_experiment(&s).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.summary, b.summary);
    // slopes may be NaN, so compare bit patterns
    let bits = |r: &starmid::bench::ExperimentReport| -> Vec<u64> { r.slopes.iter().map(|s| s.slope.to_bits()).collect() };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.rows[0].seed, replication_seed(5, 64, 0));
}

#[test]
fn constant_functions_calibrate_to_one() {
    let dict = Dictionary::new(vec![
        Affine::new(vec![0.0, 0.0], 0.5),
        Affine::new(vec![0.0, 0.0], -1.5),
        Affine::new(vec![0.0, 0.0], 2.0),
    ])
    .unwrap();
    let oracle = RiskOracle::Analytic(
        starmid::model::AnalyticOracle::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], Affine::zero(2), 0.0).unwrap(),
    );
    let draw = |t: usize| {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i + t) as f64, 1.0]).collect();
        SampleSet::from_rows(&rows, vec![0.0; 60])
    };
    for ell in [1, 3, 7] {
        let cal = calibrate_from_draws(&dict, &oracle, draw, &[ell], 0.99, &CalibrationOptions { trials: 5, ..Default::default() })
            .unwrap();
        assert_eq!((cal.block_len, cal.alpha, cal.beta, cal.coverage), (ell, 1.0, 1.0, 1.0));
    }
}

#[test]
fn gaussian_design_is_covered_at_default_constants() {
    let s = default_scenario();
    let dictionary = s.dictionary();
    let target = s.target(&dictionary, 2048, 0);
    let oracle = s.oracle_for(target.clone()).unwrap();
    let draw = |t: usize| s.draw(&target, 2048, derive_seed(21, stream::CALIBRATION, t as u64), stream::SAMPLE);
    let ext = ratio_extremes(&dictionary, &oracle, draw, &[3], 200).unwrap();
    let covered = ext[0].iter().filter(|(lo, hi)| *lo >= 0.25 && *hi <= 4.0).count();
    assert!(covered as f64 / 200.0 >= 0.99, "coverage {covered}/200");
}

#[test]
fn heavy_tailed_design_needs_longer_blocks() {
    let grid = [1, 3, 5, 9, 15, 25, 49];
    let options = CalibrationOptions { trials: 100, n: 2048, seed: 4, ..Default::default() };
    let light = calibrate_mom_constants(&default_scenario(), &grid, 0.95, &options).unwrap();
    let mut heavy = default_scenario();
    heavy.design = DesignSpec::StudentT { dim: 8, nu: 2.2, covariance: None };
    heavy.target = TargetSpec::RealizableNoise { member: 0, noise: NoiseSpec::Pareto { shape: 2.2, scale: 1.0 } };
    match calibrate_mom_constants(&heavy, &grid, 0.95, &options) {
        Ok(cal) => assert!(cal.block_len > light.block_len, "heavy l = {} vs light l = {}", cal.block_len, light.block_len),
        Err(e) => assert!(matches!(e, Error::Calibration(_)), "{e}"),
    }
}
