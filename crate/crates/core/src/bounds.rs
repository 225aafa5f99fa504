//! Operator-norm upper bounds from structured compressibility, interlayer
//! alignment factors, the alignment parsing set, network Lipschitz bounds and
//! the resulting adversarial-risk bound for binary classifiers.
//!
//! Layer bounds only read `(ε, β, k)` and the Frobenius norm, so they are
//! scale covariant. Alignment factors maximize over binary diagonal
//! activation patterns, either exhaustively or by greedy coordinate flips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compress::{default_k, profile_of_vector, residual_ratio, row_l1_profile, StructureKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{
    frobenius_norm, norm1, norm2, op_norm_inf, singular_values, svd, NormKind, WeightMatrix,
};
use crate::nn::{example_loss, Network};
use crate::prune::prune_rows;

/// What to do with a non-square layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapePolicy {
    /// Reject with `NotSquare`.
    #[default]
    Strict,
    /// Use `h = max(rows, cols)`; the result is flagged as an extension.
    Permissive,
}

/// A layer bound together with the quantities it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpNormBound {
    pub bound: f64,
    pub actual: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub k: usize,
    /// Residual of the row ℓ2 norm vector (row bound only).
    pub epsilon_r: Option<f64>,
    pub k_r: Option<usize>,
    pub h: usize,
    pub conservative_extension: bool,
}

fn effective_h(w: &WeightMatrix, policy: ShapePolicy) -> Result<(usize, bool)> {
    if w.is_square() {
        return Ok((w.rows(), false));
    }
    match policy {
        ShapePolicy::Strict => Err(Error::NotSquare {
            rows: w.rows(),
            cols: w.cols(),
        }),
        ShapePolicy::Permissive => Ok((w.rows().max(w.cols()), true)),
    }
}

fn check_k(k: usize, max: usize) -> Result<()> {
    if k == 0 || k > max {
        return Err(Error::BadK { k, max });
    }
    Ok(())
}

/// `(1−ε_ν)/(1−β_ν) · (√(h k_r) + h ε_r)/k_ν · ‖W‖_F`, bounding `‖W‖_∞`.
///
/// `ε_ν, β_ν` come from the row ℓ1 norms at `k_nu` and `ε_r` from the row ℓ2
/// norms (q = 2) at `k_r`. A zero matrix gets the bound 0.
pub fn bound_opnorm_inf_detail(
    w: &WeightMatrix,
    k_nu: usize,
    k_r: usize,
    policy: ShapePolicy,
) -> Result<OpNormBound> {
    let (h, extended) = effective_h(w, policy)?;
    check_k(k_nu, w.rows())?;
    check_k(k_r, w.rows())?;
    let fro = frobenius_norm(w);
    let actual = op_norm_inf(w);
    if fro == 0.0 {
        return Ok(OpNormBound {
            bound: 0.0,
            actual,
            epsilon: 0.0,
            beta: 0.0,
            k: k_nu,
            epsilon_r: Some(0.0),
            k_r: Some(k_r),
            h,
            conservative_extension: extended,
        });
    }
    let (nu, order) = row_l1_profile(w);
    let nu_hat: Vec<f64> = order.iter().map(|&i| norm2(w.row(i))).collect();
    let p = profile_of_vector(&nu, StructureKind::Row, k_nu)?;
    if p.beta >= 1.0 {
        return Err(Error::DegenerateSpread { layer: None });
    }
    let eps_r = residual_ratio(&nu_hat, 2.0, k_r)?;
    let hf = h as f64;
    let bound = (1.0 - p.epsilon) / (1.0 - p.beta) * ((hf * k_r as f64).sqrt() + hf * eps_r)
        / k_nu as f64
        * fro;
    Ok(OpNormBound {
        bound,
        actual,
        epsilon: p.epsilon,
        beta: p.beta,
        k: k_nu,
        epsilon_r: Some(eps_r),
        k_r: Some(k_r),
        h,
        conservative_extension: extended,
    })
}

pub fn bound_opnorm_inf(w: &WeightMatrix, k_nu: usize, k_r: usize) -> Result<f64> {
    Ok(bound_opnorm_inf_detail(w, k_nu, k_r, ShapePolicy::Strict)?.bound)
}

/// `(1−ε_σ)/(1−β_σ) · (√h/k_σ) · ‖W‖_F`, bounding `‖W‖₂`.
pub fn bound_opnorm_2_detail(w: &WeightMatrix, k_sigma: usize, policy: ShapePolicy) -> Result<OpNormBound> {
    let (h, extended) = effective_h(w, policy)?;
    check_k(k_sigma, w.rows().min(w.cols()))?;
    let fro = frobenius_norm(w);
    let sigma = singular_values(w)?;
    let actual = sigma[0];
    if fro == 0.0 {
        return Ok(OpNormBound {
            bound: 0.0,
            actual,
            epsilon: 0.0,
            beta: 0.0,
            k: k_sigma,
            epsilon_r: None,
            k_r: None,
            h,
            conservative_extension: extended,
        });
    }
    let p = profile_of_vector(&sigma, StructureKind::Spectral, k_sigma)?;
    if p.beta >= 1.0 {
        return Err(Error::DegenerateSpread { layer: None });
    }
    let bound = (1.0 - p.epsilon) / (1.0 - p.beta) * ((h as f64).sqrt() / k_sigma as f64) * fro;
    Ok(OpNormBound {
        bound,
        actual,
        epsilon: p.epsilon,
        beta: p.beta,
        k: k_sigma,
        epsilon_r: None,
        k_r: None,
        h,
        conservative_extension: extended,
    })
}

pub fn bound_opnorm_2(w: &WeightMatrix, k_sigma: usize) -> Result<f64> {
    Ok(bound_opnorm_2_detail(w, k_sigma, ShapePolicy::Strict)?.bound)
}

/// `v[k]/v[0]` with 0-based indexing, i.e. the first discarded entry over the
/// leader; 0 when `k` is past the end.
fn tail_ratio(v: &[f64], k: usize) -> Result<f64> {
    let lead = *v.first().ok_or(Error::ZeroLeader)?;
    if lead <= 0.0 {
        return Err(Error::ZeroLeader);
    }
    Ok(v.get(k).copied().unwrap_or(0.0) / lead)
}

/// `t + t' + t·t'` with `t`, `t'` the tail ratios of the two row-norm vectors.
pub fn remainder_inf(nu: &[f64], nu_next: &[f64], k: usize) -> Result<f64> {
    let a = tail_ratio(nu, k)?;
    let b = tail_ratio(nu_next, k)?;
    Ok(a + b + a * b)
}

/// `√t + √t' + √(t·t')` with `t`, `t'` the tail ratios of the two spectra.
pub fn remainder_2(sigma: &[f64], sigma_next: &[f64], k: usize) -> Result<f64> {
    let a = tail_ratio(sigma, k)?;
    let b = tail_ratio(sigma_next, k)?;
    Ok(a.sqrt() + b.sqrt() + (a * b).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMethod {
    ExactEnumeration,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Enumerate all patterns when the active support has at most this many
    /// coordinates.
    pub exact_threshold: usize,
    /// Random starts for the greedy search, in addition to the all-ones start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            exact_threshold: 14,
            restarts: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentFactor {
    /// Index `l` of the pair (layer `l`, layer `l+1`), 0-based.
    pub pair: usize,
    pub k: usize,
    pub value: f64,
    pub remainder: f64,
    pub raw_max: f64,
    pub method: SearchMethod,
    pub evaluations: u64,
    /// Coordinates where the pattern can change the product.
    pub support: usize,
}

/// `M(d) = Σ_j d_j a_j b_jᵀ` over the coordinates `j` where both factors are
/// nonzero, with a norm evaluated on `M`.
struct PatternProduct<'a> {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    norm: &'a dyn Fn(&WeightMatrix) -> f64,
}

impl PatternProduct<'_> {
    fn len(&self) -> usize {
        self.a.len()
    }

    fn build(&self, mask: &[bool]) -> WeightMatrix {
        let p = self.a.first().map_or(1, Vec::len);
        let q = self.b.first().map_or(1, Vec::len);
        let mut m = WeightMatrix::zeros(p, q);
        for (j, on) in mask.iter().enumerate() {
            if *on {
                add_rank_one(&mut m, &self.a[j], &self.b[j], 1.0);
            }
        }
        m
    }

    fn eval(&self, mask: &[bool]) -> f64 {
        (self.norm)(&self.build(mask))
    }

    fn exact(&self) -> (Vec<bool>, f64, u64) {
        let s = self.len();
        let mut best = (vec![false; s], self.eval(&vec![false; s]));
        let mut evals = 1u64;
        for bits in 1u64..(1u64 << s) {
            let mask: Vec<bool> = (0..s).map(|j| bits >> j & 1 == 1).collect();
            let v = self.eval(&mask);
            evals += 1;
            if v > best.1 {
                best = (mask, v);
            }
        }
        (best.0, best.1, evals)
    }

    fn greedy(&self, cfg: &SearchConfig) -> (Vec<bool>, f64, u64) {
        let s = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut starts = vec![vec![true; s]];
        for _ in 0..cfg.restarts {
            starts.push((0..s).map(|_| rng.random::<bool>()).collect());
        }
        let mut evals = 0u64;
        let mut best: Option<(Vec<bool>, f64)> = None;
        for mut mask in starts {
            let mut m = self.build(&mask);
            let mut val = (self.norm)(&m);
            evals += 1;
            for _ in 0..(64 * s.max(1)) {
                let mut pick: Option<(usize, f64)> = None;
                for j in 0..s {
                    let sign = if mask[j] { -1.0 } else { 1.0 };
                    add_rank_one(&mut m, &self.a[j], &self.b[j], sign);
                    let v = (self.norm)(&m);
                    add_rank_one(&mut m, &self.a[j], &self.b[j], -sign);
                    evals += 1;
                    let threshold = pick.map_or(val, |p| p.1);
                    if v > threshold + 1e-12 * threshold.abs().max(f64::MIN_POSITIVE) {
                        pick = Some((j, v));
                    }
                }
                let Some((j, _)) = pick else { break };
                mask[j] = !mask[j];
                m = self.build(&mask);
                let new_val = (self.norm)(&m);
                evals += 1;
                if new_val <= val {
                    break;
                }
                val = new_val;
            }
            if best.as_ref().is_none_or(|b| val > b.1) {
                best = Some((mask, val));
            }
        }
        let (mask, _) = best.expect("at least one start");
        let v = self.eval(&mask);
        (mask, v, evals + 1)
    }

    fn maximize(&self, cfg: &SearchConfig) -> (f64, SearchMethod, u64) {
        if self.len() <= cfg.exact_threshold && self.len() < 63 {
            let (_, v, e) = self.exact();
            (v, SearchMethod::ExactEnumeration, e)
        } else {
            let (_, v, e) = self.greedy(cfg);
            (v, SearchMethod::Greedy, e)
        }
    }
}

fn add_rank_one(m: &mut WeightMatrix, a: &[f64], b: &[f64], sign: f64) {
    for (i, ai) in a.iter().enumerate() {
        if *ai == 0.0 {
            continue;
        }
        let s = sign * ai;
        for (x, bj) in m.row_mut(i).iter_mut().zip(b) {
            *x += s * bj;
        }
    }
}

fn check_pair(w_next: &WeightMatrix, w: &WeightMatrix) -> Result<()> {
    if w_next.cols() != w.rows() {
        return Err(Error::DimensionMismatch(format!(
            "next layer takes {} inputs but layer produces {}",
            w_next.cols(),
            w.rows()
        )));
    }
    Ok(())
}

fn restrict_support(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    a.into_iter()
        .zip(b)
        .filter(|(x, y)| x.iter().any(|v| *v != 0.0) && y.iter().any(|v| *v != 0.0))
        .unzip()
}

/// `max_D ‖W'_k D W_k‖_∞ / (‖W'‖_∞ ‖W‖_∞)` plus the ℓ∞ remainder, where
/// `W_k` keeps the `k` rows of largest ℓ1 norm.
pub fn alignment_inf(w_next: &WeightMatrix, w: &WeightMatrix, k: usize, cfg: &SearchConfig) -> Result<AlignmentFactor> {
    check_pair(w_next, w)?;
    check_k(k, w.rows().min(w_next.rows()))?;
    let n = op_norm_inf(w);
    let n_next = op_norm_inf(w_next);
    if n == 0.0 || n_next == 0.0 {
        return Err(Error::ZeroLeader);
    }
    let wk = prune_rows(w, k)?;
    let wk_next = prune_rows(w_next, k)?;
    let a: Vec<Vec<f64>> = (0..w.rows()).map(|j| wk_next.column(j)).collect();
    let b: Vec<Vec<f64>> = (0..w.rows()).map(|j| wk.row(j).to_vec()).collect();
    let (a, b) = restrict_support(a, b);
    let norm = |m: &WeightMatrix| op_norm_inf(m);
    let prod = PatternProduct { a, b, norm: &norm };
    let (raw, method, evaluations) = prod.maximize(cfg);
    let raw_max = raw / (n * n_next);
    let remainder = remainder_inf(&row_l1_profile(w).0, &row_l1_profile(w_next).0, k)?;
    Ok(AlignmentFactor {
        pair: 0,
        k,
        value: raw_max + remainder,
        remainder,
        raw_max,
        method,
        evaluations,
        support: prod.len(),
    })
}

/// `max_D ‖√Σ'_k V'_kᵀ D U_k √Σ_k‖₂ / √(σ'_1 σ_1)` plus the ℓ2 remainder.
pub fn alignment_2(w_next: &WeightMatrix, w: &WeightMatrix, k: usize, cfg: &SearchConfig) -> Result<AlignmentFactor> {
    check_pair(w_next, w)?;
    check_k(k, w.rows().min(w.cols()).min(w_next.rows().min(w_next.cols())))?;
    let f = svd(w)?;
    let f_next = svd(w_next)?;
    let s1 = f.singular_values[0];
    let s1_next = f_next.singular_values[0];
    if s1 == 0.0 || s1_next == 0.0 {
        return Err(Error::ZeroLeader);
    }
    let root = |s: &[f64]| -> Vec<f64> { s[..k].iter().map(|v| v.sqrt()).collect() };
    let rs = root(&f.singular_values);
    let rs_next = root(&f_next.singular_values);
    let a: Vec<Vec<f64>> = (0..w.rows())
        .map(|j| (0..k).map(|i| rs_next[i] * f_next.v.get(j, i)).collect())
        .collect();
    let b: Vec<Vec<f64>> = (0..w.rows())
        .map(|j| (0..k).map(|i| rs[i] * f.u.get(j, i)).collect())
        .collect();
    let (a, b) = restrict_support(a, b);
    let norm = |m: &WeightMatrix| singular_values(m).map_or(f64::NAN, |s| s[0]);
    let prod = PatternProduct { a, b, norm: &norm };
    let (raw, method, evaluations) = prod.maximize(cfg);
    if !raw.is_finite() {
        return Err(Error::ConvergenceFailure {
            sweeps: crate::linalg::MAX_JACOBI_SWEEPS,
            residual: f64::NAN,
        });
    }
    let raw_max = raw / (s1 * s1_next).sqrt();
    let remainder = remainder_2(&f.singular_values, &f_next.singular_values, k)?;
    Ok(AlignmentFactor {
        pair: 0,
        k,
        value: raw_max + remainder,
        remainder,
        raw_max,
        method,
        evaluations,
        support: prod.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsingSet {
    /// 0-based pair indices, ascending, no two consecutive.
    pub indices: Vec<usize>,
    pub product: f64,
}

/// Non-adjacent subset of pair indices minimizing the product of their
/// factors. Only factors below 1 are candidates. Among equal products the set
/// with more zero factors wins, then the one that leaves out later indices.
pub fn optimal_parsing_set(factors: &[f64]) -> ParsingSet {
    #[derive(Clone)]
    struct State {
        product: f64,
        zeros: usize,
        set: Vec<usize>,
    }
    let better = |a: &State, b: &State| a.product < b.product || (a.product == b.product && a.zeros > b.zeros);
    let empty = State {
        product: 1.0,
        zeros: 0,
        set: Vec::new(),
    };
    let mut before_prev = empty.clone();
    let mut prev = empty;
    for (i, &f) in factors.iter().enumerate() {
        let exclude = prev.clone();
        let mut cur = exclude;
        if f < 1.0 {
            let mut include = before_prev.clone();
            include.product *= f;
            include.zeros += usize::from(f == 0.0);
            include.set.push(i);
            if better(&include, &cur) {
                cur = include;
            }
        }
        before_prev = std::mem::replace(&mut prev, cur);
    }
    ParsingSet {
        indices: prev.set,
        product: prev.product,
    }
}

/// Retained counts for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerK {
    pub k_nu: usize,
    pub k_r: usize,
    pub k_sigma: usize,
    /// Used for the pair (this layer, next layer).
    pub k_align: usize,
}

impl LayerK {
    pub fn uniform(k: usize) -> Self {
        Self {
            k_nu: k,
            k_r: k,
            k_sigma: k,
            k_align: k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KConfig {
    /// `ceil(0.1·rows)` for every count of every layer.
    #[default]
    Default,
    Shared(usize),
    PerLayer(Vec<LayerK>),
}

impl KConfig {
    pub fn resolve(&self, net: &Network) -> Result<Vec<LayerK>> {
        match self {
            KConfig::Default => Ok(net
                .hidden()
                .iter()
                .map(|w| LayerK::uniform(default_k(w.rows())))
                .collect()),
            KConfig::Shared(k) => Ok(vec![LayerK::uniform(*k); net.depth()]),
            KConfig::PerLayer(v) => {
                if v.len() != net.depth() {
                    return Err(Error::BadConfig(format!(
                        "{} k entries for {} layers",
                        v.len(),
                        net.depth()
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    pub k: KConfig,
    pub search: SearchConfig,
    pub policy: ShapePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBoundRow {
    pub layer: usize,
    pub bound: f64,
    pub actual: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub k: usize,
    pub epsilon_r: Option<f64>,
    pub k_r: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskBound {
    pub norm: NormKind,
    pub delta: f64,
    pub clean_risk: f64,
    pub lipschitz_bound: f64,
    /// Dual norm of the linear head (ℓ1 for ℓ∞ attacks, ℓ2 for ℓ2 attacks).
    pub head_dual_norm: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub norm: NormKind,
    pub per_layer: Vec<LayerBoundRow>,
    pub alignment_factors: Vec<AlignmentFactor>,
    /// Pairs whose alignment factor enters the product (all pairs for ℓ2).
    pub s_opt: Vec<usize>,
    pub layer_product: f64,
    pub alignment_product: f64,
    pub lipschitz_bound: f64,
    pub risk: Option<RiskBound>,
    /// Some layer was not square and the permissive policy was used.
    pub conservative_extension: bool,
    /// Some alignment factor came from the greedy search, which can
    /// underestimate the maximum.
    pub heuristic_alignment: bool,
}

fn tag_layer(e: Error, layer: usize) -> Error {
    match e {
        Error::DegenerateSpread { .. } => Error::DegenerateSpread { layer: Some(layer) },
        other => other,
    }
}

fn layer_row(layer: usize, b: &OpNormBound) -> LayerBoundRow {
    LayerBoundRow {
        layer,
        bound: b.bound,
        actual: b.actual,
        epsilon: b.epsilon,
        beta: b.beta,
        k: b.k,
        epsilon_r: b.epsilon_r,
        k_r: b.k_r,
    }
}

/// Product of the row bounds times the alignment factors on the parsing set.
pub fn lipschitz_bound_inf(net: &Network, cfg: &BoundConfig) -> Result<BoundReport> {
    let ks = cfg.k.resolve(net)?;
    let layers = net.hidden();
    let mut per_layer = Vec::with_capacity(layers.len());
    let mut extended = false;
    let mut layer_product = 1.0;
    for (l, (w, k)) in layers.iter().zip(&ks).enumerate() {
        let b = bound_opnorm_inf_detail(w, k.k_nu, k.k_r, cfg.policy).map_err(|e| tag_layer(e, l))?;
        extended |= b.conservative_extension;
        layer_product *= b.bound;
        per_layer.push(layer_row(l, &b));
    }
    let mut factors = Vec::new();
    for l in 0..layers.len().saturating_sub(1) {
        let mut f = alignment_inf(&layers[l + 1], &layers[l], ks[l].k_align, &cfg.search)?;
        f.pair = l;
        factors.push(f);
    }
    let parsing = optimal_parsing_set(&factors.iter().map(|f| f.value).collect::<Vec<_>>());
    Ok(BoundReport {
        norm: NormKind::Inf,
        heuristic_alignment: factors.iter().any(|f| f.method == SearchMethod::Greedy),
        per_layer,
        alignment_factors: factors,
        s_opt: parsing.indices,
        layer_product,
        alignment_product: parsing.product,
        lipschitz_bound: layer_product * parsing.product,
        risk: None,
        conservative_extension: extended,
    })
}

/// Product of the spectral bounds times the alignment factors of all pairs.
pub fn lipschitz_bound_2(net: &Network, cfg: &BoundConfig) -> Result<BoundReport> {
    let ks = cfg.k.resolve(net)?;
    let layers = net.hidden();
    let mut per_layer = Vec::with_capacity(layers.len());
    let mut extended = false;
    let mut layer_product = 1.0;
    for (l, (w, k)) in layers.iter().zip(&ks).enumerate() {
        let b = bound_opnorm_2_detail(w, k.k_sigma, cfg.policy).map_err(|e| tag_layer(e, l))?;
        extended |= b.conservative_extension;
        layer_product *= b.bound;
        per_layer.push(layer_row(l, &b));
    }
    let mut factors = Vec::new();
    let mut alignment_product = 1.0;
    for l in 0..layers.len().saturating_sub(1) {
        let mut f = alignment_2(&layers[l + 1], &layers[l], ks[l].k_align, &cfg.search)?;
        f.pair = l;
        alignment_product *= f.value;
        factors.push(f);
    }
    Ok(BoundReport {
        norm: NormKind::Two,
        heuristic_alignment: factors.iter().any(|f| f.method == SearchMethod::Greedy),
        s_opt: (0..factors.len()).collect(),
        per_layer,
        alignment_factors: factors,
        layer_product,
        alignment_product,
        lipschitz_bound: layer_product * alignment_product,
        risk: None,
        conservative_extension: extended,
    })
}

pub fn lipschitz_bound(net: &Network, norm: NormKind, cfg: &BoundConfig) -> Result<BoundReport> {
    match norm {
        NormKind::Inf => lipschitz_bound_inf(net, cfg),
        NormKind::Two => lipschitz_bound_2(net, cfg),
    }
}

/// Mean binary cross-entropy of a binary network.
pub fn clean_binary_risk(net: &Network, data: &Dataset) -> Result<f64> {
    check_binary(net, data)?;
    let total: f64 = data
        .inputs
        .iter()
        .zip(&data.labels)
        .map(|(x, &y)| example_loss(net, x, y))
        .sum();
    Ok(total / data.len() as f64)
}

fn check_binary(net: &Network, data: &Dataset) -> Result<()> {
    if !net.is_binary() {
        return Err(Error::NonBinaryLabels(format!(
            "head has {} outputs, expected a single score",
            net.head().rows()
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.num_classes != 2 || data.labels.iter().any(|&l| l > 1) {
        return Err(Error::NonBinaryLabels(format!(
            "dataset has {} classes",
            data.num_classes
        )));
    }
    Ok(())
}

/// Clean risk plus `delta · L · ‖c‖_*` for the head vector `c`.
pub fn adversarial_risk_bound(
    net: &Network,
    data: &Dataset,
    delta: f64,
    norm: NormKind,
    lipschitz: f64,
) -> Result<RiskBound> {
    check_binary(net, data)?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::BadConfig(format!("delta must be ≥ 0, got {delta}")));
    }
    let clean_risk = clean_binary_risk(net, data)?;
    let head_dual_norm = norm.dual_norm(net.head().row(0));
    let value = if delta == 0.0 {
        clean_risk
    } else {
        clean_risk + delta * lipschitz * head_dual_norm
    };
    Ok(RiskBound {
        norm,
        delta,
        clean_risk,
        lipschitz_bound: lipschitz,
        head_dual_norm,
        value,
    })
}

/// Lipschitz bound for `norm` with the risk bound attached.
pub fn bound_report_with_risk(
    net: &Network,
    data: &Dataset,
    delta: f64,
    norm: NormKind,
    cfg: &BoundConfig,
) -> Result<BoundReport> {
    let mut report = lipschitz_bound(net, norm, cfg)?;
    report.risk = Some(adversarial_risk_bound(net, data, delta, norm, report.lipschitz_bound)?);
    Ok(report)
}

/// ℓ1 norm of a head row; exposed for reports.
pub fn head_l1(net: &Network) -> f64 {
    norm1(net.head().row(0))
}
