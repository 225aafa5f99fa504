//! Relative top-k residuals, spread, PQ-index and the structure vectors of a
//! matrix (row ℓ1 norms, row ℓ2 norms, singular values).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lp_norm, norm1, norm2, singular_values, WeightMatrix};

/// Indices of the `k` largest-magnitude entries, largest first.
/// Equal magnitudes are ranked by lower index.
pub fn top_k_indices(theta: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    idx.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()).then(a.cmp(&b)));
    idx.truncate(k.min(theta.len()));
    idx
}

/// Entries of `theta` sorted by descending magnitude (absolute values).
pub fn sorted_magnitudes(theta: &[f64]) -> Vec<f64> {
    let mut m: Vec<f64> = theta.iter().map(|v| v.abs()).collect();
    m.sort_by(|a, b| b.total_cmp(a));
    m
}

/// Keeps the `k` largest-magnitude entries in place and zeros the rest.
pub fn compressed_topk(theta: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; theta.len()];
    for i in top_k_indices(theta, k) {
        out[i] = theta[i];
    }
    out
}

fn check_k(k: usize, len: usize) -> Result<()> {
    if k > len {
        return Err(Error::BadK { k, max: len });
    }
    Ok(())
}

/// `‖θ − θ_k‖_q / ‖θ‖_q`.
pub fn residual_ratio(theta: &[f64], q: f64, k: usize) -> Result<f64> {
    check_k(k, theta.len())?;
    let total = lp_norm(theta, q);
    if total == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut tail = theta.to_vec();
    for i in top_k_indices(theta, k) {
        tail[i] = 0.0;
    }
    Ok((lp_norm(&tail, q) / total).min(1.0))
}

/// `|‖θ_k‖_q − (1 − ε^q)^{1/q} ‖θ‖_q|` with `ε` the achieved residual ratio.
pub fn strict_norm_identity_check(theta: &[f64], q: f64, k: usize) -> Result<f64> {
    let eps = residual_ratio(theta, q, k)?;
    let kept = lp_norm(&compressed_topk(theta, k), q);
    let predicted = (1.0 - eps.powf(q)).max(0.0).powf(1.0 / q) * lp_norm(theta, q);
    Ok((kept - predicted).abs())
}

/// `1 − |θ_(k)| / |θ_(1)|` with magnitudes ranked in descending order.
pub fn spread(theta: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > theta.len() {
        return Err(Error::BadK {
            k,
            max: theta.len(),
        });
    }
    let sorted = sorted_magnitudes(theta);
    if sorted[0] == 0.0 {
        return Err(Error::ZeroLeader);
    }
    Ok((1.0 - sorted[k - 1] / sorted[0]).clamp(0.0, 1.0))
}

/// `1 − d^{1/q − 1/p} ‖w‖_p / ‖w‖_q` for `0 < p < q`.
pub fn pq_index(w: &[f64], p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && p < q) {
        return Err(Error::BadOrders { p, q });
    }
    let nq = lp_norm(w, q);
    if nq == 0.0 {
        return Err(Error::ZeroVector);
    }
    let d = w.len() as f64;
    let exponent = if q.is_infinite() { -1.0 / p } else { 1.0 / q - 1.0 / p };
    Ok(1.0 - d.powf(exponent) * lp_norm(w, p) / nq)
}

/// `1 − ε − (k/d)^{1/p − 1/q}`, a lower bound on the PQ-index of any vector
/// of length `d` whose `q`-norm top-`k` residual ratio is `ε`. Needs `1 ≤ p < q`.
pub fn pq_index_lower_bound(epsilon: f64, k: usize, d: usize, p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0 && p < q) {
        return Err(Error::BadOrders { p, q });
    }
    check_k(k, d)?;
    let phi = 1.0 / p - if q.is_infinite() { 0.0 } else { 1.0 / q };
    Ok(1.0 - epsilon - (k as f64 / d as f64).powf(phi))
}

/// Row ℓ1 norms (descending), row ℓ2 norms in the same row order, and
/// singular values (descending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureVectors {
    pub nu: Vec<f64>,
    pub nu_hat: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Original row index of each entry of `nu` / `nu_hat`.
    pub row_order: Vec<usize>,
}

/// Row ℓ1 norms sorted descending, with the row permutation (ties by index).
pub fn row_l1_profile(w: &WeightMatrix) -> (Vec<f64>, Vec<usize>) {
    let raw: Vec<f64> = (0..w.rows()).map(|i| norm1(w.row(i))).collect();
    let order = top_k_indices(&raw, raw.len());
    (order.iter().map(|&i| raw[i]).collect(), order)
}

pub fn structure_vectors(w: &WeightMatrix) -> Result<StructureVectors> {
    let (nu, row_order) = row_l1_profile(w);
    let nu_hat = row_order.iter().map(|&i| norm2(w.row(i))).collect();
    Ok(StructureVectors {
        nu,
        nu_hat,
        sigma: singular_values(w)?,
        row_order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    /// Row ℓ1 norms ν, q = 1.
    Row,
    /// Singular values σ, q = 1.
    Spectral,
    /// Row ℓ2 norms ν̂, q = 2.
    WithinRow,
    /// All entries flattened, q = 1.
    Unstructured,
}

impl StructureKind {
    pub fn order(self) -> f64 {
        match self {
            StructureKind::WithinRow => 2.0,
            _ => 1.0,
        }
    }

    /// The vector this kind of profile is computed on.
    pub fn vector(self, w: &WeightMatrix) -> Result<Vec<f64>> {
        Ok(match self {
            StructureKind::Row => row_l1_profile(w).0,
            StructureKind::Spectral => singular_values(w)?,
            StructureKind::WithinRow => {
                let (_, order) = row_l1_profile(w);
                order.iter().map(|&i| norm2(w.row(i))).collect()
            }
            StructureKind::Unstructured => w.data().to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressibilityProfile {
    pub kind: StructureKind,
    pub q: f64,
    pub k: usize,
    pub epsilon: f64,
    pub beta: f64,
}

/// Achieved `(ε, β)` for the structure vector of `kind` at retained count `k`.
pub fn profile(w: &WeightMatrix, kind: StructureKind, k: usize) -> Result<CompressibilityProfile> {
    profile_of_vector(&kind.vector(w)?, kind, k)
}

pub fn profile_of_vector(
    theta: &[f64],
    kind: StructureKind,
    k: usize,
) -> Result<CompressibilityProfile> {
    let q = kind.order();
    let epsilon = residual_ratio(theta, q, k)?;
    let beta = spread(theta, k)?;
    Ok(CompressibilityProfile {
        kind,
        q,
        k,
        epsilon,
        beta,
    })
}

/// Default shared retained count, `ceil(0.1·n)` and at least 1.
pub fn default_k(n: usize) -> usize {
    ((n as f64) * 0.1).ceil().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn residual_examples() {
        let a = [10.0, 2.0, 1.0, 1.0];
        let b = [6.0, 6.0, 1.0, 1.0];
        assert!(close(residual_ratio(&a, 1.0, 2).unwrap(), 2.0 / 14.0, 1e-15));
        assert!(close(residual_ratio(&b, 1.0, 2).unwrap(), 2.0 / 14.0, 1e-15));
        assert_eq!(residual_ratio(&a, 2.0, 4).unwrap(), 0.0);
        assert!(matches!(residual_ratio(&[0.0, 0.0], 1.0, 1), Err(Error::ZeroVector)));
    }

    #[test]
    fn topk_examples() {
        assert_eq!(compressed_topk(&[3.0, 4.0], 1), vec![0.0, 4.0]);
        assert_eq!(compressed_topk(&[3.0, 4.0], 0), vec![0.0, 0.0]);
        assert_eq!(compressed_topk(&[5.0, -5.0, 1.0], 2), vec![5.0, -5.0, 0.0]);
        assert_eq!(compressed_topk(&[1.0, -1.0, 1.0], 1), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn strict_identity_examples() {
        assert!(strict_norm_identity_check(&[3.0, 4.0], 2.0, 1).unwrap() < 1e-15);
        assert!(close(residual_ratio(&[3.0, 4.0], 2.0, 1).unwrap(), 0.6, 1e-15));
        assert_eq!(strict_norm_identity_check(&[1.0, 2.0, 3.0], 1.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn spread_examples() {
        assert!(close(spread(&[10.0, 2.0, 1.0, 1.0], 2).unwrap(), 0.8, 1e-15));
        assert_eq!(spread(&[6.0, 6.0, 1.0, 1.0], 2).unwrap(), 0.0);
        assert_eq!(spread(&[2.5; 7], 5).unwrap(), 0.0);
        assert!(matches!(spread(&[0.0, 0.0], 1), Err(Error::ZeroLeader)));
    }

    #[test]
    fn pq_examples() {
        assert!(close(pq_index(&[1.0; 4], 1.0, 2.0).unwrap(), 0.0, 1e-15));
        assert!(close(pq_index(&[1.0, 0.0, 0.0, 0.0], 1.0, 2.0).unwrap(), 0.5, 1e-15));
        assert!(matches!(pq_index(&[1.0], 2.0, 1.0), Err(Error::BadOrders { .. })));
        assert!(matches!(pq_index(&[0.0, 0.0], 1.0, 2.0), Err(Error::ZeroVector)));
    }

    #[test]
    fn structure_vector_examples() {
        let s = structure_vectors(&WeightMatrix::identity(3)).unwrap();
        assert_eq!(s.nu, vec![1.0; 3]);
        assert!(s.sigma.iter().all(|v| close(*v, 1.0, 1e-15)));
        let w = WeightMatrix::from_rows(&[vec![10.0, 2.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(structure_vectors(&w).unwrap().nu, vec![12.0, 2.0]);
        let d = WeightMatrix::from_diag(&[3.0, 1.0]).unwrap();
        assert_eq!(structure_vectors(&d).unwrap().sigma, vec![3.0, 1.0]);
        // row order follows ν, not the matrix
        let w = WeightMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -4.0]]).unwrap();
        let s = structure_vectors(&w).unwrap();
        assert_eq!(s.row_order, vec![1, 0]);
        assert_eq!(s.nu_hat, vec![4.0, 1.0]);
    }

    #[test]
    fn profile_examples() {
        let p = profile(&WeightMatrix::identity(4), StructureKind::Row, 4).unwrap();
        assert_eq!((p.epsilon, p.beta), (0.0, 0.0));

        let mut w = WeightMatrix::zeros(3, 3);
        w.row_mut(1).copy_from_slice(&[1.0, -2.0, 0.5]);
        let p = profile(&w, StructureKind::Row, 1).unwrap();
        assert_eq!((p.epsilon, p.beta), (0.0, 0.0));

        let w = WeightMatrix::from_rows(&[vec![10.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let p = profile(&w, StructureKind::Row, 1).unwrap();
        assert!(close(p.epsilon, 2.0 / 14.0, 1e-15));
        assert_eq!(p.beta, 0.0);
        assert_eq!(p.q, 1.0);
        assert_eq!(profile(&w, StructureKind::WithinRow, 1).unwrap().q, 2.0);
    }

    #[test]
    fn default_k_rounds_up() {
        assert_eq!(default_k(64), 7);
        assert_eq!(default_k(10), 1);
        assert_eq!(default_k(3), 1);
        assert_eq!(default_k(11), 2);
    }
}
