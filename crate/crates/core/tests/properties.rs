//! Property tests over randomly drawn inputs.

mod common;

use common::*;
use longnet::baselines::{hooi, hosvd};
use longnet::estimator::{project, Radii};
use longnet::events::{bin_edges, equal_partition, Edge, EdgeSet, Partition};
use longnet::experiment::assign_folds;
use longnet::io::{read_factors, write_factors};
use longnet::merging::{
    best_ordered_partition, criterion_path, endpoints_from_segments, normalize_w, select_k, MergeConfig,
};
use longnet::pipeline::merge_gate;
use longnet::synthetic::{estimation_error, expand_truth, generate_truth, SyntheticConfig};
use longnet::tensor::{mode_fold, mode_unfold};
use longnet::{Matrix, Tensor3};
use proptest::prelude::*;

fn tensor_strategy(max: usize) -> impl Strategy<Value = Tensor3> {
    (1..=max, 1..=max, 1..=max).prop_flat_map(|dims| {
        prop::collection::vec(-5.0..5.0f64, dims.0 * dims.1 * dims.2)
            .prop_map(move |data| Tensor3::new(dims, data).unwrap())
    })
}

fn matrix_strategy(rows: std::ops::RangeInclusive<usize>, cols: usize) -> impl Strategy<Value = Matrix> {
    rows.prop_flat_map(move |r| {
        prop::collection::vec(-2.0..2.0f64, r * cols).prop_map(move |d| Matrix::new(r, cols, d).unwrap())
    })
}

fn breakpoints(horizon: f64, max: usize) -> impl Strategy<Value = Partition> {
    prop::collection::btree_set(1u32..1000, 0..max).prop_map(move |cuts| {
        let mut b: Vec<f64> = cuts.into_iter().map(|c| horizon * c as f64 / 1000.0).collect();
        b.push(horizon);
        Partition::new(b).unwrap()
    })
}

fn edges(n1: usize, n2: usize, horizon: f64) -> impl Strategy<Value = EdgeSet> {
    prop::collection::vec((0..n1, 0..n2, 0.0..horizon), 0..300).prop_map(move |v| {
        let e = v.into_iter().map(|(i, j, t)| Edge { i, j, t }).collect();
        EdgeSet::from_edges(n1, n2, horizon, e).unwrap()
    })
}

proptest! {
    #[test]
    fn unfold_refold_round_trip(t in tensor_strategy(5)) {
        for mode in 1..=3 {
            let m = mode_unfold(&t, mode).unwrap();
            prop_assert_eq!(&mode_fold(&m, mode, t.dims()).unwrap(), &t);
            prop_assert!((m.frobenius_norm() - t.frobenius_norm()).abs() <= 1e-12 * t.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn assembly_matches_loops(seed in any::<u64>(), d in (1usize..=6, 1usize..=6, 1usize..=6)) {
        let mut r = rng(seed);
        let ranks = (d.0.min(2), d.1.min(3), d.2.min(2));
        let f = bounded_factors(&mut r, d, ranks, 2.0);
        let slow = naive_assemble(&f);
        prop_assert!(distance(&f.assemble(), &slow) <= 1e-12 * slow.frobenius_norm());
    }

    #[test]
    fn binning_conserves_edges(e in edges(3, 4, 10.0), p in breakpoints(10.0, 12)) {
        let y = bin_edges(&e, &p).unwrap();
        prop_assert_eq!(y.sum() as usize, e.len());
    }

    #[test]
    fn refining_splits_a_slice(e in edges(3, 2, 5.0), p in breakpoints(5.0, 6), at in 0.01..0.99f64) {
        // split interval 0 at a fraction of its width
        let first = p.breakpoints()[0];
        let mut refined = vec![first * at];
        refined.extend_from_slice(p.breakpoints());
        let q = Partition::new(refined).unwrap();
        let (y, z) = (bin_edges(&e, &p).unwrap(), bin_edges(&e, &q).unwrap());
        for (a, (b, c)) in y.slice(0).iter().zip(z.slice(0).iter().zip(z.slice(1))) {
            prop_assert_eq!(*a, b + c);
        }
        for l in 1..p.interval_count() {
            prop_assert_eq!(y.slice(l), z.slice(l + 1));
        }
    }

    #[test]
    fn breakpoint_edges_open_the_next_interval(k in 1usize..8) {
        let p = equal_partition(8.0, 8).unwrap();
        let t = p.start(k);
        let e = EdgeSet::from_edges(1, 1, 8.0, vec![Edge { i: 0, j: 0, t }]).unwrap();
        prop_assert_eq!(bin_edges(&e, &p).unwrap()[(0, 0, k)], 1.0);
    }

    #[test]
    fn projection_is_feasible_and_idempotent(seed in any::<u64>(), radii in (0.1..3.0f64, 0.1..3.0f64, 0.1..3.0f64, 0.1..3.0f64)) {
        let mut r = rng(seed);
        let f = bounded_factors(&mut r, (5, 4, 6), (2, 2, 3), 20.0);
        let radii = Radii { core: radii.0, u: radii.1, v: radii.2, w: radii.3 };
        let p = project(&f, &radii);
        prop_assert!(p.core.frobenius_norm() <= radii.core * (1.0 + 1e-12));
        prop_assert!(p.u.two_to_inf_norm() <= radii.u * (1.0 + 1e-12));
        prop_assert!(p.v.two_to_inf_norm() <= radii.v * (1.0 + 1e-12));
        prop_assert!(p.w.two_to_inf_norm() <= radii.w * (1.0 + 1e-12));
        prop_assert_eq!(project(&p, &radii), p);
    }

    #[test]
    fn dp_equals_exhaustive(rows in matrix_strategy(1..=12, 2), k in 1usize..=4) {
        prop_assume!(k <= rows.rows());
        let got = best_ordered_partition(&rows, k).unwrap();
        let (best, _) = exhaustive_best(&rows, k);
        let ends: Vec<usize> = got.segments.iter().map(|s| *s.end()).collect();
        let recomputed = split_loss(&rows, &ends);
        prop_assert!((got.loss - best).abs() <= 1e-9 * best.max(1.0));
        prop_assert!((recomputed - best).abs() <= 1e-9 * best.max(1.0));
    }

    #[test]
    fn dp_loss_non_increasing_in_k(rows in matrix_strategy(2..=15, 3)) {
        let mut prev = f64::INFINITY;
        for k in 1..=rows.rows().min(6) {
            let loss = best_ordered_partition(&rows, k).unwrap().loss;
            prop_assert!(loss <= prev + 1e-12);
            prev = loss;
        }
    }

    #[test]
    fn normalization_whitens(w in matrix_strategy(4..=30, 3)) {
        prop_assume!(longnet::linalg::sigma_r(&w, 3).unwrap() > 1e-3);
        let l = w.rows() as f64;
        let n = normalize_w(&w, 1e-12).unwrap();
        let defect = n.gram().scale(1.0 / l).sub(&Matrix::identity(3)).frobenius_norm();
        prop_assert!(defect < 1e-10);
    }

    #[test]
    fn select_k_ignores_order_inside_constant_segment(seed in any::<u64>(), len in 2usize..6) {
        let mut r = rng(seed);
        let a = uniform_matrix(&mut r, 1, 2, 3.0);
        let b = uniform_matrix(&mut r, 1, 2, 3.0);
        let noise = uniform_matrix(&mut r, 3, 2, 0.1);
        // rows: `len` copies of a, then three noisy rows around b
        let build = |swap: bool| {
            Matrix::from_fn(len + 3, 2, |i, c| {
                if i < len { a.get(0, c) } else {
                    let k = if swap { 2 - (i - len) } else { i - len };
                    b.get(0, c) + noise.get(k, c) * if i - len == 1 { 0.0 } else { 1.0 }
                }
            })
        };
        let cfg = MergeConfig { nu: 0.05, k_max: 4, epsilon: 0.1, condition_tol: 1e-12 };
        let (x, y) = (build(false), build(true));
        let (px, py) = (criterion_path(&x, &cfg).unwrap(), criterion_path(&y, &cfg).unwrap());
        prop_assert!((px[0] - py[0]).abs() <= 1e-12);
        prop_assert_eq!(select_k(&x, &cfg).unwrap() >= 1, true);
    }

    #[test]
    fn endpoints_increase_to_horizon(cuts in prop::collection::btree_set(0usize..19, 0..5)) {
        let mut ends: Vec<usize> = cuts.into_iter().collect();
        ends.push(19);
        let mut segments = Vec::new();
        let mut start = 0;
        for e in ends {
            segments.push(start..=e);
            start = e + 1;
        }
        let eta = endpoints_from_segments(&segments, 0.5, 10.0);
        prop_assert!(eta.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*eta.last().unwrap(), 10.0);
    }

    #[test]
    fn factor_file_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = bounded_factors(&mut r, (4, 3, 5), (2, 3, 1), 1.7);
        let mut buf = Vec::new();
        write_factors(&f, &mut buf).unwrap();
        prop_assert_eq!(read_factors(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn partition_file_round_trip(p in breakpoints(7.25, 20)) {
        let mut buf = Vec::new();
        p.write(&mut buf).unwrap();
        prop_assert_eq!(Partition::read(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn folds_partition_every_pair(n1 in 1usize..12, n2 in 1usize..12, folds in 2usize..6, seed in any::<u64>()) {
        prop_assume!(folds <= n1 * n2);
        let a = assign_folds(n1, n2, folds, seed).unwrap();
        prop_assert_eq!(&a, &assign_folds(n1, n2, folds, seed).unwrap());
        let mut sizes = vec![0usize; folds];
        for &f in &a { sizes[f] += 1; }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn truth_invariants_hold(seed in any::<u64>(), k0 in 3usize..6) {
        let cfg = SyntheticConfig { n: 8, horizon: 30.0, k0, seed, ..SyntheticConfig::default() };
        let gt = generate_truth(&cfg).unwrap();
        let n = 8.0;
        let defect = |m: &Matrix, s: f64| m.gram().scale(1.0 / s).sub(&Matrix::identity(m.cols())).frobenius_norm();
        prop_assert!(defect(&gt.factors.u, n) < 1e-10);
        prop_assert!(defect(&gt.factors.v, n) < 1e-10);
        let w = gt.eta.widths();
        let weighted = Matrix::from_fn(3, 3, |a, b| (0..k0).map(|k| w[k] * gt.factors.w.get(k, a) * gt.factors.w.get(k, b)).sum());
        prop_assert!(weighted.scale(1.0 / 30.0).sub(&Matrix::identity(3)).frobenius_norm() < 1e-10);
        let (lo, hi) = w.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        prop_assert!(hi / lo <= 3.0 + 1e-12);
        let star = expand_truth(&gt, &gt.eta).unwrap();
        prop_assert_eq!(estimation_error(&star, &gt.theta()).unwrap(), 0.0);
    }

    #[test]
    fn baseline_factors_orthonormal_and_hooi_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = uniform_tensor(&mut r, (5, 6, 4), 1.0);
        let h = hosvd(&t, (2, 3, 2)).unwrap();
        let o = hooi(&t, (2, 3, 2), 50, 1e-9).unwrap();
        for m in [&h.u, &h.v, &h.w, &o.factors.u, &o.factors.v, &o.factors.w] {
            prop_assert!(m.gram().sub(&Matrix::identity(m.cols())).frobenius_norm() < 1e-10);
        }
        prop_assert!(o.errors.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn gate_matches_printed_inequality(n in 2usize..200, t in 1.5..5000.0f64) {
        let nf = n as f64;
        let eps = 0.1;
        let bound = nf.powf(2.0 / 3.0) * (nf * t).ln().powf(1.0 + 2.0 * eps / 3.0);
        prop_assert_eq!(merge_gate(n, t, eps), t <= bound);
    }
}
