use proptest::prelude::*;

use starmid::model::{empirical_risk, Affine, Dictionary, EvaluationMatrix, Midpoint, SampleSet};
use starmid::mom::{median_of_means, mom_abs_distance, partition_blocks};
use starmid::procedure::{aggregate, aggregate_matrix, build_v, build_w, AggregationConfig, RadiusSource};

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, usize)> {
    (1usize..6, 8usize..40, 1usize..4).prop_flat_map(|(m, n, l)| {
        (
            prop::collection::vec(prop::collection::vec(-20i32..20, n), m)
                .prop_map(|c| c.into_iter().map(|v| v.into_iter().map(f64::from).collect()).collect()),
            prop::collection::vec((-20i32..20).prop_map(f64::from), n),
            Just(l),
        )
    })
}

fn matrix(cols: &[Vec<f64>]) -> EvaluationMatrix {
    EvaluationMatrix::from_columns(cols.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn f_hat_always_in_v((cols, ys, l) in instance(), r_u in 0.0f64..3.0) {
        let cfg = AggregationConfig { block_len: l, ..AggregationConfig::default() };
        let half = ys.len() / 2;
        let d1 = matrix(&cols).row_range(0, half);
        let v = build_v(&d1, &ys[..half], &cfg, r_u).unwrap();
        prop_assert!(v.v_ids.contains(&v.f_hat_id));
        prop_assert!(v.audit[v.f_hat_id].slack >= 0.0);
    }

    #[test]
    fn enlarging_radius_never_shrinks_v((cols, ys, l) in instance(), r in 0.0f64..2.0, extra in 0.0f64..2.0) {
        let cfg = AggregationConfig { block_len: l, ..AggregationConfig::default() };
        let d1 = matrix(&cols);
        let small = build_v(&d1, &ys, &cfg, r).unwrap();
        let large = build_v(&d1, &ys, &cfg, r + extra).unwrap();
        prop_assert!(small.v_ids.iter().all(|id| large.v_ids.contains(id)));
    }

    #[test]
    fn selection_minimizes_over_w((cols, ys, l) in instance(), r_u in 0.0f64..3.0) {
        let cfg = AggregationConfig { block_len: l, ..AggregationConfig::default() }.with_radius(r_u);
        let evals = matrix(&cols);
        let res = aggregate_matrix(&evals, &ys, &cfg).unwrap();
        let half = ys.len() / 2;
        let d2 = evals.row_range(half, ys.len());
        prop_assert_eq!(res.w_pairs.len(), res.v_ids.len() * (res.v_ids.len() + 1) / 2);
        for &mp in &res.w_pairs {
            prop_assert!(mp.j <= mp.k);
            prop_assert!(res.selected_risk <= empirical_risk(&d2.midpoint_column(mp), &ys[half..]));
        }
        prop_assert_eq!(res.selected_risk, empirical_risk(&d2.midpoint_column(res.selected), &ys[half..]));
    }

    #[test]
    fn mom_distance_is_symmetric_and_nonnegative(
        pair in (1usize..60).prop_flat_map(|n| (prop::collection::vec(-1e3f64..1e3, n), prop::collection::vec(-1e3f64..1e3, n))),
        l in 1usize..5,
    ) {
        let (f, g) = pair;
        prop_assume!(f.len() >= l);
        let p = partition_blocks(f.len(), l).unwrap();
        let d = mom_abs_distance(&f, &g, &p).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, mom_abs_distance(&g, &f, &p).unwrap());
        let abs: Vec<f64> = f.iter().zip(&g).map(|(a, b)| (a - b).abs()).collect();
        prop_assert_eq!(d, median_of_means(&abs, &p).unwrap());
    }
}

#[test]
fn realizable_noiseless_interpolates_on_second_half() {
    let dict = Dictionary::new(vec![
        Affine::linear(vec![1.0, 0.0]),
        Affine::linear(vec![0.0, 1.0]),
        Affine::linear(vec![1.0, 1.0]),
        Affine::new(vec![-1.0, 2.0], 0.5),
    ])
    .unwrap();
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()]).collect();
    let ys: Vec<f64> = rows.iter().map(|x| dict.get(3).eval(x)).collect();
    let sample = SampleSet::from_rows(&rows, ys).unwrap();
    let cfg = AggregationConfig { block_len: 2, ..AggregationConfig::default() }.with_radius(0.0);
    let res = aggregate(&sample, &dict, &cfg).unwrap();
    assert_eq!(res.selected_risk, 0.0);
    assert_eq!(res.selected, Midpoint::single(3));
}

#[test]
fn aggregation_is_deterministic() {
    let cols: Vec<Vec<f64>> = (0..5).map(|j| (0..30).map(|i| ((i * 7 + j * 3) % 11) as f64).collect()).collect();
    let ys: Vec<f64> = (0..30).map(|i| (i % 5) as f64).collect();
    let cfg = AggregationConfig { block_len: 3, r_u: RadiusSource::PlugIn { kappa: 2.0 }, ..AggregationConfig::default() };
    let a = aggregate_matrix(&matrix(&cols), &ys, &cfg).unwrap();
    let b = aggregate_matrix(&matrix(&cols), &ys, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn w_pairs_are_canonical() {
    let w = build_w(&[4, 1, 7]);
    assert_eq!(w.len(), 6);
    for a in &w {
        assert!(!w.iter().any(|b| b.j == a.k && b.k == a.j && a.j != a.k));
    }
}
