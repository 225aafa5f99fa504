//! Lipschitz and risk bounds against brute-force oracles on small networks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robcomp::attack::{evaluate_robustness, AttackConfig};
use robcomp::bounds::{bound_report_with_risk, lipschitz_bound, BoundConfig, KConfig};
use robcomp::data::Dataset;
use robcomp::nn::{softplus, Network};
use robcomp::{NormKind, WeightMatrix};

fn to_na(w: &WeightMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(w.rows(), w.cols(), w.data())
}

fn norm_of(m: &DMatrix<f64>, norm: NormKind) -> f64 {
    match norm {
        NormKind::Two => m.singular_values().max(),
        NormKind::Inf => m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
    }
}

/// `max_D ‖W_λ D_{λ-1} ⋯ D_1 W_1‖` over all binary diagonals, which bounds
/// the Lipschitz constant of the ReLU encoder from above.
fn pattern_max(layers: &[WeightMatrix], norm: NormKind) -> f64 {
    let h = layers[0].rows();
    let slots = layers.len() - 1;
    let mut best: f64 = 0.0;
    for bits in 0u64..(1u64 << (h * slots)) {
        let mut p = to_na(&layers[0]);
        for (s, w) in layers[1..].iter().enumerate() {
            let d = DMatrix::from_fn(h, h, |i, j| {
                if i == j && bits >> (s * h + i) & 1 == 1 {
                    1.0
                } else {
                    0.0
                }
            });
            p = to_na(w) * d * p;
        }
        best = best.max(norm_of(&p, norm));
    }
    best
}

#[test]
fn bound_dominates_every_activation_pattern() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for trial in 0..40 {
        let width = rng.random_range(2..=4);
        let depth = rng.random_range(2..=3);
        let mut net = Network::random(width, width, depth, 1, trial);
        if trial % 2 == 1 {
            // Heavy-tailed entries make some rows and directions dominant.
            for w in net.hidden_mut() {
                for v in w.data_mut() {
                    *v *= rng.random_range(0.0f64..1.0).powi(4) * 10.0;
                }
            }
        }
        for norm in [NormKind::Two, NormKind::Inf] {
            let truth = pattern_max(net.hidden(), norm);
            for k in 1..=width {
                let cfg = BoundConfig {
                    k: KConfig::Shared(k),
                    ..BoundConfig::default()
                };
                let r = match lipschitz_bound(&net, norm, &cfg) {
                    Ok(r) => r,
                    Err(robcomp::Error::DegenerateSpread { .. }) => continue,
                    Err(e) => panic!("{e}"),
                };
                assert!(
                    r.lipschitz_bound >= truth * (1.0 - 1e-9),
                    "trial {trial} {norm:?} k={k}: bound {} < pattern max {truth}",
                    r.lipschitz_bound
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= 150, "only {checked} bounds were defined");
}

#[test]
fn linear_model_adversarial_risk_has_closed_form() {
    let c = [0.8, -1.2, 0.5];
    let net = Network::new(vec![], WeightMatrix::from_rows(&[c.to_vec()]).unwrap()).unwrap();
    let inputs = vec![vec![0.3, 0.1, -0.2], vec![-0.5, 0.4, 0.9], vec![1.0, -1.0, 0.0]];
    let labels = vec![1, 0, 1];
    let data = Dataset::new(inputs.clone(), labels.clone(), 2).unwrap();
    for norm in [NormKind::Two, NormKind::Inf] {
        let delta = 0.2;
        let dual = norm.dual_norm(&c);
        let expected: f64 = inputs
            .iter()
            .zip(&labels)
            .map(|(x, &y)| {
                let s: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
                let sign = if y == 1 { 1.0 } else { -1.0 };
                softplus(-sign * s + delta * dual)
            })
            .sum::<f64>()
            / 3.0;
        let out = evaluate_robustness(&net, &data, &AttackConfig::new(norm, delta), None).unwrap();
        assert!((out.adversarial_loss - expected).abs() < 1e-6, "{norm:?}: {} vs {expected}", out.adversarial_loss);
        let rhs = bound_report_with_risk(&net, &data, delta, norm, &BoundConfig::default())
            .unwrap()
            .risk
            .unwrap()
            .value;
        assert!(rhs >= expected - 1e-12);
    }
}

#[test]
fn pgd_risk_stays_below_risk_bound_on_deep_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..6 {
        let net = Network::random(6, 6, 3, 1, seed);
        let inputs: Vec<Vec<f64>> = (0..40).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let data = Dataset::new(inputs, labels, 2).unwrap();
        for norm in [NormKind::Two, NormKind::Inf] {
            let delta = 0.3;
            let out = evaluate_robustness(&net, &data, &AttackConfig::new(norm, delta), None).unwrap();
            let rep = bound_report_with_risk(&net, &data, delta, norm, &BoundConfig::default()).unwrap();
            assert!(out.adversarial_loss <= rep.risk.unwrap().value);
            assert!(out.max_secant.unwrap_or(0.0) <= rep.lipschitz_bound);
        }
    }
}
