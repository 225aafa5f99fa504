use proptest::prelude::*;

use robcomp::attack::project;
use robcomp::bounds::{alignment_2, alignment_inf, bound_opnorm_2, bound_opnorm_inf, optimal_parsing_set, SearchConfig};
use robcomp::compress::{pq_index, residual_ratio, spread, strict_norm_identity_check};
use robcomp::linalg::{frobenius_norm, op_norm_2, op_norm_inf, singular_values};
use robcomp::nn::frobenius_project;
use robcomp::prune::{prune_rows, prune_spectral};
use robcomp::{NormKind, WeightMatrix};

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 1..40).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-6))
}

fn square() -> impl Strategy<Value = WeightMatrix> {
    (1usize..7).prop_flat_map(|h| {
        prop::collection::vec(-5.0f64..5.0, h * h).prop_map(move |d| WeightMatrix::new(h, h, d).unwrap())
    })
}

fn nonzero_square() -> impl Strategy<Value = WeightMatrix> {
    square().prop_filter("nonzero", |w| w.max_abs() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn residual_in_unit_interval_and_nonincreasing(theta in vector(), q in prop::sample::select(vec![0.5, 1.0, 2.0, 3.0])) {
        let mut prev = f64::INFINITY;
        for k in 0..=theta.len() {
            let e = residual_ratio(&theta, q, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
            prop_assert!(e <= prev + 1e-12);
            prev = e;
        }
        prop_assert_eq!(residual_ratio(&theta, q, theta.len()).unwrap(), 0.0);
    }

    #[test]
    fn residual_and_spread_are_scale_invariant(theta in vector(), c in 0.01f64..100.0, k in 1usize..40) {
        let k = k.min(theta.len());
        let scaled: Vec<f64> = theta.iter().map(|v| v * c).collect();
        let (e1, e2) = (residual_ratio(&theta, 1.0, k).unwrap(), residual_ratio(&scaled, 1.0, k).unwrap());
        prop_assert!((e1 - e2).abs() <= 1e-12);
        let (b1, b2) = (spread(&theta, k).unwrap(), spread(&scaled, k).unwrap());
        prop_assert!((b1 - b2).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&b1));
    }

    #[test]
    fn strict_identity_holds(theta in vector(), q in prop::sample::select(vec![1.0, 1.5, 2.0, 4.0]), k in 0usize..40) {
        let k = k.min(theta.len());
        let scale = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(strict_norm_identity_check(&theta, q, k).unwrap() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn pq_index_is_scale_invariant_and_bounded(theta in vector(), c in 0.01f64..100.0) {
        let scaled: Vec<f64> = theta.iter().map(|v| v * c).collect();
        let a = pq_index(&theta, 1.0, 2.0).unwrap();
        let b = pq_index(&scaled, 1.0, 2.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((-1e-12..=1.0).contains(&a));
    }

    #[test]
    fn layer_bounds_dominate_norms(w in nonzero_square(), k in 1usize..7, k_r in 1usize..7) {
        let h = w.rows();
        let (k, k_r) = (k.min(h), k_r.min(h));
        if let Ok(b) = bound_opnorm_inf(&w, k, k_r) {
            prop_assert!(b >= op_norm_inf(&w) * (1.0 - 1e-9));
        }
        if let Ok(b) = bound_opnorm_2(&w, k) {
            prop_assert!(b >= op_norm_2(&w).unwrap() * (1.0 - 1e-9));
        }
    }

    #[test]
    fn alignment_raw_max_at_most_one(w in nonzero_square(), seed in 0u64..1000, k in 1usize..7) {
        let h = w.rows();
        let k = k.min(h);
        let next = WeightMatrix::new(h, h, w.data().iter().rev().map(|v| v + 0.5).collect()).unwrap();
        let cfg = SearchConfig { seed, ..SearchConfig::default() };
        if let Ok(a) = alignment_inf(&next, &w, k, &cfg) {
            prop_assert!(a.raw_max <= 1.0 + 1e-9);
            prop_assert!((a.value - a.raw_max - a.remainder).abs() <= 1e-12);
        }
        if let Ok(a) = alignment_2(&next, &w, k, &cfg) {
            prop_assert!(a.raw_max <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn parsing_set_is_independent_and_optimal_among_singletons(factors in prop::collection::vec(0.0f64..2.0, 0..12)) {
        let s = optimal_parsing_set(&factors);
        prop_assert!(s.indices.windows(2).all(|w| w[1] >= w[0] + 2));
        prop_assert!(s.product <= 1.0);
        for f in &factors {
            prop_assert!(s.product <= *f || *f >= 1.0);
        }
    }

    #[test]
    fn row_pruning_keeps_k_rows_and_is_idempotent(w in square(), k in 1usize..7) {
        let k = k.min(w.rows());
        let p = prune_rows(&w, k).unwrap();
        let nonzero = (0..p.rows()).filter(|&i| p.row(i).iter().any(|v| *v != 0.0)).count();
        prop_assert!(nonzero <= k);
        prop_assert_eq!(prune_rows(&p, k).unwrap(), p.clone());
        prop_assert!(op_norm_inf(&p) == op_norm_inf(&w));
    }

    #[test]
    fn spectral_pruning_keeps_leading_values(w in nonzero_square(), k in 1usize..7) {
        let k = k.min(w.rows());
        let p = prune_spectral(&w, k).unwrap();
        let s = singular_values(&w).unwrap();
        let sp = singular_values(&p).unwrap();
        for i in 0..k {
            prop_assert!((s[i] - sp[i]).abs() <= 1e-9 * s[0]);
        }
        for v in &sp[k..] {
            prop_assert!(*v <= 1e-9 * s[0]);
        }
    }

    #[test]
    fn projection_lands_in_ball(a in prop::collection::vec(-10.0f64..10.0, 1..20), delta in 0.01f64..5.0) {
        for norm in [NormKind::Two, NormKind::Inf] {
            let mut b = a.clone();
            project(&mut b, norm, delta);
            prop_assert!(norm.norm(&b) <= delta * (1.0 + 1e-12));
            if norm.norm(&a) <= delta {
                prop_assert_eq!(&b, &a);
            }
        }
    }

    #[test]
    fn frobenius_projection_hits_target(w in nonzero_square(), c in 0.1f64..50.0) {
        let p = frobenius_project(&w, c).unwrap();
        prop_assert!((frobenius_norm(&p) - c).abs() <= 1e-9 * c);
    }
}
