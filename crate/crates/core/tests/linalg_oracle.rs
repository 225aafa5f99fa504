use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robcomp::linalg::{op_norm_2, singular_values, spectral_norm_power, svd};
use robcomp::WeightMatrix;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> WeightMatrix {
    WeightMatrix::new(r, c, (0..r * c).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
}

fn oracle(w: &WeightMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = DMatrix::from_row_slice(w.rows(), w.cols(), w.data())
        .singular_values()
        .iter()
        .cloned()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[test]
fn singular_values_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let r = rng.random_range(1..=20);
        let c = rng.random_range(1..=20);
        let w = random(&mut rng, r, c);
        let ours = singular_values(&w).unwrap();
        let theirs = oracle(&w);
        assert_eq!(ours.len(), theirs.len());
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() <= 1e-10 * theirs[0].max(1.0), "{a} vs {b}");
        }
        assert!((op_norm_2(&w).unwrap() - theirs[0]).abs() <= 1e-10 * theirs[0].max(1.0));
    }
}

#[test]
fn truncated_reconstruction_error_is_tail_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let w = random(&mut rng, 9, 6);
        let f = svd(&w).unwrap();
        let s = oracle(&w);
        for k in 0..=6 {
            let approx = f.reconstruct(k);
            let err: f64 = w.sub(&approx).unwrap().data().iter().map(|v| v * v).sum::<f64>().sqrt();
            let tail: f64 = s[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((err - tail).abs() <= 1e-9 * s[0], "k={k}: {err} vs {tail}");
        }
    }
}

#[test]
fn power_iteration_agrees_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let w = random(&mut rng, 12, 7);
        let p = spectral_norm_power(&w, 2000).unwrap();
        let s = oracle(&w)[0];
        assert!(p <= s * (1.0 + 1e-12));
        assert!(p >= s * (1.0 - 1e-6), "{p} vs {s}");
    }
}
