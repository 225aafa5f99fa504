//! Row and spectral pruning, a uniform per-layer baseline and residual-level
//! (ε-targeted) global pruning. The head is never pruned.

use serde::{Deserialize, Serialize};

use crate::attack::AttackConfig;
use crate::compress::{residual_ratio, row_l1_profile, top_k_indices};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{norm1, singular_values, svd, WeightMatrix};
use crate::nn::{accuracy, robust_accuracy, Network};

/// Relative size of `σ_{k+1}` below which a matrix already counts as rank `k`
/// and spectral pruning returns it unchanged.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Keeps the `k` rows of largest ℓ1 norm (ties by lower index), zeroing the rest.
pub fn prune_rows(w: &WeightMatrix, k: usize) -> Result<WeightMatrix> {
    if k == 0 || k > w.rows() {
        return Err(Error::BadK { k, max: w.rows() });
    }
    if k == w.rows() {
        return Ok(w.clone());
    }
    let norms: Vec<f64> = (0..w.rows()).map(|i| norm1(w.row(i))).collect();
    let mut out = WeightMatrix::zeros(w.rows(), w.cols());
    for i in top_k_indices(&norms, k) {
        out.row_mut(i).copy_from_slice(w.row(i));
    }
    Ok(out)
}

/// Best rank-`k` approximation `U_k Σ_k V_kᵀ`.
pub fn prune_spectral(w: &WeightMatrix, k: usize) -> Result<WeightMatrix> {
    let r = w.rows().min(w.cols());
    if k == 0 || k > r {
        return Err(Error::BadK { k, max: r });
    }
    if k == r {
        return Ok(w.clone());
    }
    let f = svd(w)?;
    let s = &f.singular_values;
    if s[k] <= RANK_TOLERANCE * s[0] {
        return Ok(w.clone());
    }
    Ok(f.reconstruct(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneKind {
    Rows,
    Spectral,
}

impl PruneKind {
    /// Largest meaningful retained count for a layer.
    pub fn dim(self, w: &WeightMatrix) -> usize {
        match self {
            PruneKind::Rows => w.rows(),
            PruneKind::Spectral => w.rows().min(w.cols()),
        }
    }

    pub fn apply(self, w: &WeightMatrix, k: usize) -> Result<WeightMatrix> {
        match self {
            PruneKind::Rows => prune_rows(w, k),
            PruneKind::Spectral => prune_spectral(w, k),
        }
    }

    /// Parameters retained by a layer pruned to `k`: `k·cols` for rows,
    /// `k(rows+cols+1)` for a rank-`k` factorization, capped at the dense count.
    pub fn retained(self, w: &WeightMatrix, k: usize) -> f64 {
        let dense = (w.rows() * w.cols()) as f64;
        let kept = match self {
            PruneKind::Rows => (k * w.cols()) as f64,
            PruneKind::Spectral => (k * (w.rows() + w.cols() + 1)) as f64,
        };
        kept.min(dense)
    }

    /// The structure vector ranked by this kind (ν or σ).
    fn vector(self, w: &WeightMatrix) -> Result<Vec<f64>> {
        match self {
            PruneKind::Rows => Ok(row_l1_profile(w).0),
            PruneKind::Spectral => singular_values(w),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PlanTarget {
    Ratio(f64),
    Epsilon(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningPlan {
    pub kind: PruneKind,
    /// Retained count per hidden layer.
    pub per_layer_k: Vec<usize>,
    pub target: PlanTarget,
    /// Residual level the plan was derived from (global plans only).
    pub epsilon: Option<f64>,
    pub achieved_ratio: f64,
    /// `achieved_ratio − target ratio`.
    pub ratio_gap: Option<f64>,
}

/// Retained fraction of hidden-layer parameters for the given counts.
pub fn achieved_ratio(net: &Network, kind: PruneKind, ks: &[usize]) -> f64 {
    let total: f64 = net.hidden().iter().map(|w| (w.rows() * w.cols()) as f64).sum();
    if total == 0.0 {
        return 1.0;
    }
    let kept: f64 = net
        .hidden()
        .iter()
        .zip(ks)
        .map(|(w, &k)| kind.retained(w, k))
        .sum();
    kept / total
}

/// Applies `plan` to the hidden layers of `net`.
pub fn apply_plan(net: &Network, plan: &PruningPlan) -> Result<Network> {
    if plan.per_layer_k.len() != net.depth() {
        return Err(Error::BadConfig(format!(
            "plan covers {} layers, network has {}",
            plan.per_layer_k.len(),
            net.depth()
        )));
    }
    let hidden = net
        .hidden()
        .iter()
        .zip(&plan.per_layer_k)
        .map(|(w, &k)| plan.kind.apply(w, k))
        .collect::<Result<Vec<_>>>()?;
    Network::new(hidden, net.head().clone())
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::BadConfig(format!("ratio must lie in (0, 1], got {ratio}")));
    }
    Ok(())
}

/// Every layer keeps `max(1, round(ratio·dim))` units.
pub fn layerwise_prune(net: &Network, kind: PruneKind, ratio: f64) -> Result<(Network, PruningPlan)> {
    check_ratio(ratio)?;
    let ks: Vec<usize> = net
        .hidden()
        .iter()
        .map(|w| {
            let d = kind.dim(w);
            ((ratio * d as f64).round() as usize).clamp(1, d)
        })
        .collect();
    let achieved = achieved_ratio(net, kind, &ks);
    let plan = PruningPlan {
        kind,
        per_layer_k: ks,
        target: PlanTarget::Ratio(ratio),
        epsilon: None,
        achieved_ratio: achieved,
        ratio_gap: Some(achieved - ratio),
    };
    Ok((apply_plan(net, &plan)?, plan))
}

/// Layerwise plan using one shared `k` (clamped to each layer's dimension).
pub fn uniform_k_plan(net: &Network, kind: PruneKind, k: usize) -> PruningPlan {
    let ks: Vec<usize> = net.hidden().iter().map(|w| k.clamp(1, kind.dim(w))).collect();
    let achieved = achieved_ratio(net, kind, &ks);
    PruningPlan {
        kind,
        per_layer_k: ks,
        target: PlanTarget::Ratio(achieved),
        epsilon: None,
        achieved_ratio: achieved,
        ratio_gap: Some(0.0),
    }
}

/// 0 followed by 199 points log-spaced over `[1e-6, 1]`.
pub fn default_eps_grid() -> Vec<f64> {
    let n = 199;
    let mut g = vec![0.0];
    g.extend((0..n).map(|i| 10f64.powf(-6.0 + 6.0 * i as f64 / (n - 1) as f64)));
    g
}

/// Smallest `k ≥ 1` with residual ratio (q = 1) at most `eps`, from the
/// precomputed residuals `res[k-1]`.
fn minimal_k(res: &[f64], eps: f64) -> usize {
    res.iter().position(|r| *r <= eps).map_or(res.len(), |i| i + 1)
}

fn residual_table(v: &[f64]) -> Vec<f64> {
    (1..=v.len())
        .map(|k| residual_ratio(v, 1.0, k).unwrap_or(0.0))
        .collect()
}

/// Plans for every ε in `grid` (per-layer minimal counts and achieved ratio).
pub fn eps_scan(net: &Network, kind: PruneKind, grid: &[f64]) -> Result<Vec<(f64, Vec<usize>, f64)>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::BadConfig("epsilon grid must be ascending".into()));
    }
    let tables = net
        .hidden()
        .iter()
        .map(|w| kind.vector(w).map(|v| residual_table(&v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(grid
        .iter()
        .map(|&eps| {
            let ks: Vec<usize> = tables.iter().map(|t| minimal_k(t, eps)).collect();
            let r = achieved_ratio(net, kind, &ks);
            (eps, ks, r)
        })
        .collect())
}

/// Chooses the grid ε whose plan's achieved ratio is closest to
/// `target_ratio` (ties toward more retention) and applies it.
pub fn eps_targeted_global_prune(
    net: &Network,
    kind: PruneKind,
    target_ratio: f64,
    grid: &[f64],
) -> Result<(Network, PruningPlan)> {
    check_ratio(target_ratio)?;
    let scan = eps_scan(net, kind, grid)?;
    let mut best = &scan[0];
    for cand in &scan[1..] {
        let d_c = (cand.2 - target_ratio).abs();
        let d_b = (best.2 - target_ratio).abs();
        if d_c < d_b || (d_c == d_b && cand.2 > best.2) {
            best = cand;
        }
    }
    let plan = PruningPlan {
        kind,
        per_layer_k: best.1.clone(),
        target: PlanTarget::Ratio(target_ratio),
        epsilon: Some(best.0),
        achieved_ratio: best.2,
        ratio_gap: Some(best.2 - target_ratio),
    };
    Ok((apply_plan(net, &plan)?, plan))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMethod {
    Layerwise,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionPoint {
    pub target_ratio: f64,
    pub achieved_ratio: f64,
    pub epsilon: Option<f64>,
    pub clean_accuracy: f64,
    pub robust_accuracy: Option<f64>,
    pub per_layer_k: Vec<usize>,
}

/// Clean (and optionally robust) accuracy of the pruned model at each ratio,
/// without fine-tuning.
pub fn retention_eval(
    net: &Network,
    kind: PruneKind,
    method: PruneMethod,
    ratios: &[f64],
    data: &Dataset,
    attack: Option<&AttackConfig>,
    grid: &[f64],
) -> Result<Vec<RetentionPoint>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ratios
        .iter()
        .map(|&r| {
            let (pruned, plan) = match method {
                PruneMethod::Layerwise => layerwise_prune(net, kind, r)?,
                PruneMethod::Global => eps_targeted_global_prune(net, kind, r, grid)?,
            };
            Ok(RetentionPoint {
                target_ratio: r,
                achieved_ratio: plan.achieved_ratio,
                epsilon: plan.epsilon,
                clean_accuracy: accuracy(&pruned, data),
                robust_accuracy: attack.map(|a| robust_accuracy(&pruned, data, a)),
                per_layer_k: plan.per_layer_k,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, op_norm_2};

    fn m(rows: &[Vec<f64>]) -> WeightMatrix {
        WeightMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn prune_rows_examples() {
        let w = m(&[vec![10.0, 2.0], vec![1.0, 1.0]]);
        assert_eq!(prune_rows(&w, 2).unwrap(), w);
        assert_eq!(prune_rows(&w, 1).unwrap(), m(&[vec![10.0, 2.0], vec![0.0, 0.0]]));
        assert!(matches!(prune_rows(&w, 0), Err(Error::BadK { .. })));
        assert!(matches!(prune_rows(&w, 3), Err(Error::BadK { .. })));
    }

    #[test]
    fn prune_spectral_examples() {
        let d = WeightMatrix::from_diag(&[3.0, 1.0]).unwrap();
        let p = prune_spectral(&d, 1).unwrap();
        assert!(frobenius_norm(&p.sub(&WeightMatrix::from_diag(&[3.0, 0.0]).unwrap()).unwrap()) < 1e-14);
        assert_eq!(prune_spectral(&d, 2).unwrap(), d);
        let w = m(&[vec![1.0, 2.0, 0.5], vec![-0.3, 0.7, 1.1], vec![0.9, -1.4, 0.2]]);
        let s = singular_values(&w).unwrap();
        let err = op_norm_2(&w.sub(&prune_spectral(&w, 1).unwrap()).unwrap()).unwrap();
        assert!((err - s[1]).abs() < 1e-8);
    }

    #[test]
    fn layerwise_examples() {
        let net = Network::random(4, 4, 2, 1, 0);
        let (p, plan) = layerwise_prune(&net, PruneKind::Rows, 1.0).unwrap();
        assert_eq!(p, net);
        assert_eq!(plan.achieved_ratio, 1.0);
        let (_, plan) = layerwise_prune(&net, PruneKind::Rows, 0.5).unwrap();
        assert_eq!(plan.per_layer_k, vec![2, 2]);
        assert!(layerwise_prune(&net, PruneKind::Rows, 0.0).is_err());
    }

    #[test]
    fn global_examples() {
        let net = Network::random(6, 6, 2, 1, 1);
        let (p, plan) = eps_targeted_global_prune(&net, PruneKind::Spectral, 1.0, &default_eps_grid()).unwrap();
        assert_eq!(p, net);
        assert_eq!(plan.epsilon, Some(0.0));
        assert_eq!(plan.per_layer_k, vec![6, 6]);
        assert!(matches!(
            eps_targeted_global_prune(&net, PruneKind::Rows, 0.5, &[]),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn grid_shape() {
        let g = default_eps_grid();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-6).abs() < 1e-18);
        assert!((g[199] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_ratio_is_capped() {
        let w = WeightMatrix::identity(4);
        assert_eq!(PruneKind::Spectral.retained(&w, 4), 16.0);
        assert_eq!(PruneKind::Spectral.retained(&w, 1), 9.0);
    }
}
