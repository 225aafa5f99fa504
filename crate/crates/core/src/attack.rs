//! Norm-bounded input attacks (FGSM, multi-restart PGD, universal
//! perturbations) and the diagnostics measured on their outputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, svd, NormKind, SvdFactors, WeightMatrix};
use crate::nn::{encoder_vjp, example_loss, input_gradient, logit_loss, predicted_class, Network};

/// Perturbations shorter than this are not used for secant ratios.
pub const SECANT_MIN_NORM: f64 = 1e-12;

/// Label written into reports for the evaluation attack.
pub const PGD_LABEL: &str = "pgd-multi-restart-fgsm-start";
pub const UAE_LABEL: &str = "uae-fgsm-mean-gradient";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub norm: NormKind,
    pub delta: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Defaults to `2.5·delta/steps`.
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Optional `[lo, hi]` box the attacked input must stay in.
    #[serde(default)]
    pub clip: Option<[f64; 2]>,
}

fn default_steps() -> usize {
    40
}

fn default_restarts() -> usize {
    5
}

impl AttackConfig {
    pub fn new(norm: NormKind, delta: f64) -> Self {
        Self {
            norm,
            delta,
            steps: default_steps(),
            step_size: None,
            restarts: default_restarts(),
            seed: 0,
            clip: None,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
            .unwrap_or(2.5 * self.delta / self.steps.max(1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::BadConfig(format!("delta must be positive, got {}", self.delta)));
        }
        if self.steps == 0 {
            return Err(Error::BadConfig("steps must be ≥ 1".into()));
        }
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::BadConfig("step_size must be positive".into()));
            }
        }
        if let Some([lo, hi]) = self.clip {
            if !(lo < hi) {
                return Err(Error::BadConfig("clip box needs lo < hi".into()));
            }
        }
        Ok(())
    }
}

/// Projects `a` onto the `delta`-ball of `norm`.
pub fn project(a: &mut [f64], norm: NormKind, delta: f64) {
    match norm {
        NormKind::Inf => a.iter_mut().for_each(|v| *v = v.clamp(-delta, delta)),
        NormKind::Two => {
            let n = norm2(a);
            if n > delta {
                let s = delta / n;
                a.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
}

fn clip_to_box(a: &mut [f64], x: &[f64], clip: Option<[f64; 2]>) {
    if let Some([lo, hi]) = clip {
        for (ai, xi) in a.iter_mut().zip(x) {
            *ai = (xi + *ai).clamp(lo, hi) - xi;
        }
    }
}

/// Unit-size ascent direction: `sign(g)` for ℓ∞, `g/‖g‖₂` for ℓ2.
fn ascent_direction(g: &[f64], norm: NormKind) -> Vec<f64> {
    match norm {
        NormKind::Inf => g
            .iter()
            .map(|v| {
                if *v > 0.0 {
                    1.0
                } else if *v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect(),
        NormKind::Two => {
            let n = norm2(g).max(1e-12);
            g.iter().map(|v| v / n).collect()
        }
    }
}

fn add(x: &[f64], a: &[f64]) -> Vec<f64> {
    x.iter().zip(a).map(|(u, v)| u + v).collect()
}

fn random_in_ball(rng: &mut ChaCha8Rng, dim: usize, norm: NormKind, delta: f64) -> Vec<f64> {
    match norm {
        NormKind::Inf => (0..dim).map(|_| rng.random_range(-delta..=delta)).collect(),
        NormKind::Two => {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let n = norm2(&v).max(f64::MIN_POSITIVE);
            let r: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
            v.iter_mut().for_each(|x| *x *= delta * r / n);
            v
        }
    }
}

fn random_on_sphere(rng: &mut ChaCha8Rng, dim: usize, norm: NormKind, delta: f64) -> Vec<f64> {
    match norm {
        NormKind::Inf => (0..dim)
            .map(|_| if rng.random::<bool>() { delta } else { -delta })
            .collect(),
        NormKind::Two => {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let n = norm2(&v).max(f64::MIN_POSITIVE);
            v.iter().map(|x| x * delta / n).collect()
        }
    }
}

/// One signed-gradient step of size `delta`.
pub fn fgsm(net: &Network, x: &[f64], label: usize, cfg: &AttackConfig) -> Vec<f64> {
    let (_, g) = input_gradient(net, x, label);
    if g.iter().all(|v| *v == 0.0) {
        return vec![0.0; x.len()];
    }
    let mut a: Vec<f64> = ascent_direction(&g, cfg.norm)
        .into_iter()
        .map(|d| cfg.delta * d)
        .collect();
    project(&mut a, cfg.norm, cfg.delta);
    clip_to_box(&mut a, x, cfg.clip);
    a
}

fn rng_for(cfg: &AttackConfig, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    rng
}

/// PGD search returning the best perturbation and its loss. Candidates are
/// the zero perturbation, the FGSM point, every iterate of every restart and
/// the optional `warm` start.
fn pgd_search(
    net: &Network,
    x: &[f64],
    label: usize,
    cfg: &AttackConfig,
    stream: u64,
    warm: Option<&[f64]>,
) -> (Vec<f64>, f64) {
    let dim = x.len();
    let mut best = (vec![0.0; dim], example_loss(net, x, label));
    let consider = |a: &[f64], loss: f64, best: &mut (Vec<f64>, f64)| {
        if loss > best.1 {
            *best = (a.to_vec(), loss);
        }
    };
    if let Some(w) = warm {
        let mut a = w.to_vec();
        project(&mut a, cfg.norm, cfg.delta);
        clip_to_box(&mut a, x, cfg.clip);
        consider(&a, example_loss(net, &add(x, &a), label), &mut best);
    }
    let start = fgsm(net, x, label, cfg);
    consider(&start, example_loss(net, &add(x, &start), label), &mut best);

    let eta = cfg.step_size();
    let mut rng = rng_for(cfg, stream);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(cfg.restarts + 1);
    if let Some(w) = warm {
        starts.push(w.to_vec());
    }
    for r in 0..cfg.restarts {
        starts.push(if r == 0 {
            start.clone()
        } else {
            random_in_ball(&mut rng, dim, cfg.norm, cfg.delta)
        });
    }
    for mut a in starts {
        project(&mut a, cfg.norm, cfg.delta);
        clip_to_box(&mut a, x, cfg.clip);
        for _ in 0..cfg.steps {
            let (loss, g) = input_gradient(net, &add(x, &a), label);
            consider(&a, loss, &mut best);
            for (ai, di) in a.iter_mut().zip(ascent_direction(&g, cfg.norm)) {
                *ai += eta * di;
            }
            project(&mut a, cfg.norm, cfg.delta);
            clip_to_box(&mut a, x, cfg.clip);
        }
        consider(&a, example_loss(net, &add(x, &a), label), &mut best);
    }
    best
}

/// Projected gradient ascent with restarts. `stream` selects an independent
/// random stream so that examples can be attacked in parallel reproducibly.
pub fn pgd(net: &Network, x: &[f64], label: usize, cfg: &AttackConfig, stream: u64) -> Vec<f64> {
    pgd_search(net, x, label, cfg, stream, None).0
}

/// PGD at each budget of an ascending grid, each warm-started from the best
/// perturbation of the previous budget, so the loss is non-decreasing.
pub fn pgd_sweep(
    net: &Network,
    x: &[f64],
    label: usize,
    cfg: &AttackConfig,
    deltas: &[f64],
    stream: u64,
) -> Result<Vec<(Vec<f64>, f64)>> {
    if deltas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::BadConfig("delta grid must be ascending".into()));
    }
    let mut out: Vec<(Vec<f64>, f64)> = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let c = AttackConfig {
            delta: d,
            ..cfg.clone()
        };
        let warm = out.last().map(|(a, _)| a.as_slice());
        out.push(pgd_search(net, x, label, &c, stream, warm));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvAlignment {
    /// `|v_iᵀ a|` for each right singular vector, in descending σ order.
    pub projections: Vec<f64>,
    pub k: usize,
    /// `Σ_{i≤k} (v_iᵀ a)² / ‖a‖₂²` (0 for a zero perturbation).
    pub top_k_mass: f64,
}

pub fn sv_alignment_with(factors: &SvdFactors, a: &[f64], k: usize) -> Result<SvAlignment> {
    if a.len() != factors.v.rows() {
        return Err(Error::ShapeMismatch(format!(
            "perturbation has length {}, layer has {} columns",
            a.len(),
            factors.v.rows()
        )));
    }
    let projections: Vec<f64> = (0..factors.rank_capacity())
        .map(|i| dot(&factors.right_vector(i), a).abs())
        .collect();
    let na2 = dot(a, a);
    let k = k.min(projections.len());
    let top_k_mass = if na2 > 0.0 {
        (projections[..k].iter().map(|p| p * p).sum::<f64>() / na2).min(1.0)
    } else {
        0.0
    };
    Ok(SvAlignment {
        projections,
        k,
        top_k_mass,
    })
}

/// Projections of `a` on the right singular vectors of `layer`.
pub fn sv_alignment(layer: &WeightMatrix, a: &[f64], k: usize) -> Result<SvAlignment> {
    if a.len() != layer.cols() {
        return Err(Error::ShapeMismatch(format!(
            "perturbation has length {}, layer has {} columns",
            a.len(),
            layer.cols()
        )));
    }
    sv_alignment_with(&svd(layer)?, a, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub perturbation: Vec<f64>,
    pub clean_loss: f64,
    pub adversarial_loss: f64,
    pub clean_correct: bool,
    pub robust_correct: bool,
    /// `‖Φ(x+a) − Φ(x)‖/‖a‖` in the attack norm.
    pub secant: Option<f64>,
    /// `‖z_adv − z‖₂/‖z‖₂` with `z = Φ(x)`.
    pub amplification: Option<f64>,
    pub sv_alignment: Option<SvAlignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub attack: String,
    pub norm: NormKind,
    pub delta: f64,
    pub clean_loss: f64,
    pub adversarial_loss: f64,
    /// Adversarial minus clean risk.
    pub gap: f64,
    pub clean_accuracy: f64,
    pub robust_accuracy: f64,
    pub max_secant: Option<f64>,
    pub mean_amplification: Option<f64>,
    pub mean_top_k_mass: Option<f64>,
    pub examples: Vec<ExampleOutcome>,
}

impl AttackOutcome {
    pub fn perturbations(&self) -> impl Iterator<Item = &[f64]> {
        self.examples.iter().map(|e| e.perturbation.as_slice())
    }

    pub fn secants(&self) -> Vec<f64> {
        self.examples.iter().filter_map(|e| e.secant).collect()
    }
}

/// Which layer's singular directions the perturbations are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentProbe {
    pub layer: usize,
    pub k: usize,
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Attacks every example with PGD and gathers the gap, secant,
/// amplification and singular-direction diagnostics.
pub fn evaluate_robustness(
    net: &Network,
    data: &Dataset,
    cfg: &AttackConfig,
    probe: Option<AlignmentProbe>,
) -> Result<AttackOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let factors = match probe {
        Some(p) => {
            let layer = net.hidden().get(p.layer).ok_or_else(|| {
                Error::BadConfig(format!("no hidden layer {} to probe", p.layer))
            })?;
            Some(svd(layer)?)
        }
        None => None,
    };
    let examples: Vec<Result<ExampleOutcome>> = data
        .inputs
        .par_iter()
        .zip(data.labels.par_iter())
        .enumerate()
        .map(|(i, (x, &y))| {
            let a = pgd(net, x, y, cfg, i as u64);
            let xa = add(x, &a);
            let clean_logits = net.forward(x)?.logits;
            let adv_logits = net.forward(&xa)?.logits;
            let z = net.encode(x);
            let z_adv = net.encode(&xa);
            let diff: Vec<f64> = z_adv.iter().zip(&z).map(|(p, q)| p - q).collect();
            let an = cfg.norm.norm(&a);
            let secant = (an >= SECANT_MIN_NORM).then(|| cfg.norm.norm(&diff) / an);
            let zn = norm2(&z);
            let amplification = (zn > 0.0).then(|| norm2(&diff) / zn);
            let sv = match (&factors, probe) {
                (Some(f), Some(p)) if an >= SECANT_MIN_NORM => Some(sv_alignment_with(f, &a, p.k)?),
                _ => None,
            };
            Ok(ExampleOutcome {
                clean_loss: logit_loss(&clean_logits, y).0,
                adversarial_loss: logit_loss(&adv_logits, y).0,
                clean_correct: predicted_class(&clean_logits) == y,
                robust_correct: predicted_class(&adv_logits) == y,
                perturbation: a,
                secant,
                amplification,
                sv_alignment: sv,
            })
        })
        .collect();
    let examples = examples.into_iter().collect::<Result<Vec<_>>>()?;
    let n = examples.len() as f64;
    let clean_loss = examples.iter().map(|e| e.clean_loss).sum::<f64>() / n;
    let adversarial_loss = examples.iter().map(|e| e.adversarial_loss).sum::<f64>() / n;
    let secants: Vec<f64> = examples.iter().filter_map(|e| e.secant).collect();
    let amps: Vec<f64> = examples.iter().filter_map(|e| e.amplification).collect();
    let masses: Vec<f64> = examples
        .iter()
        .filter_map(|e| e.sv_alignment.as_ref().map(|s| s.top_k_mass))
        .collect();
    Ok(AttackOutcome {
        attack: PGD_LABEL.to_string(),
        norm: cfg.norm,
        delta: cfg.delta,
        clean_loss,
        adversarial_loss,
        gap: adversarial_loss - clean_loss,
        clean_accuracy: examples.iter().filter(|e| e.clean_correct).count() as f64 / n,
        robust_accuracy: examples.iter().filter(|e| e.robust_correct).count() as f64 / n,
        max_secant: secants.iter().cloned().reduce(f64::max),
        mean_amplification: mean(&amps),
        mean_top_k_mass: mean(&masses),
        examples,
    })
}

/// Searches the `delta`-ball around `x` for a perturbation maximizing the
/// representation change and returns the largest secant ratio seen.
pub fn max_secant(net: &Network, x: &[f64], cfg: &AttackConfig, stream: u64) -> f64 {
    let z = net.encode(x);
    let ratio = |a: &[f64]| {
        let an = cfg.norm.norm(a);
        if an < SECANT_MIN_NORM {
            return 0.0;
        }
        let d: Vec<f64> = net.encode(&add(x, a)).iter().zip(&z).map(|(p, q)| p - q).collect();
        cfg.norm.norm(&d) / an
    };
    let mut rng = rng_for(cfg, stream);
    let eta = cfg.step_size();
    let mut best = 0.0f64;
    for _ in 0..cfg.restarts.max(1) {
        let mut a = random_on_sphere(&mut rng, x.len(), cfg.norm, cfg.delta);
        clip_to_box(&mut a, x, cfg.clip);
        for _ in 0..cfg.steps {
            best = best.max(ratio(&a));
            let xa = add(x, &a);
            let d: Vec<f64> = net.encode(&xa).iter().zip(&z).map(|(p, q)| p - q).collect();
            // ascent on ½‖d‖₂² for ℓ2, on the largest |d_i| for ℓ∞
            let seed = match cfg.norm {
                NormKind::Two => d,
                NormKind::Inf => {
                    let mut e = vec![0.0; d.len()];
                    if let Some((i, v)) = d
                        .iter()
                        .enumerate()
                        .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
                    {
                        e[i] = v.signum();
                    }
                    e
                }
            };
            let g = encoder_vjp(net, &xa, &seed);
            if g.iter().all(|v| *v == 0.0) {
                break;
            }
            for (ai, di) in a.iter_mut().zip(ascent_direction(&g, cfg.norm)) {
                *ai += eta * di;
            }
            project(&mut a, cfg.norm, cfg.delta);
            clip_to_box(&mut a, x, cfg.clip);
        }
        best = best.max(ratio(&a));
    }
    best
}

/// Mean input gradient over `idx`, summed in a fixed order.
fn mean_input_gradient(net: &Network, data: &Dataset, idx: &[usize], u: &[f64]) -> Vec<f64> {
    let partial: Vec<Vec<f64>> = idx
        .par_chunks(16)
        .map(|chunk| {
            let mut acc = vec![0.0; u.len()];
            for &i in chunk {
                let (_, g) = input_gradient(net, &add(&data.inputs[i], u), data.labels[i]);
                acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; u.len()];
    for p in partial {
        total.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
    }
    let n = idx.len() as f64;
    total.iter_mut().for_each(|a| *a /= n);
    total
}

/// A single perturbation built from signed (ℓ∞) or normalized (ℓ2) mean
/// batch gradients, projected onto the budget after every step.
pub fn uae_fgsm(
    net: &Network,
    data: &Dataset,
    cfg: &AttackConfig,
    epochs: usize,
    batch_size: usize,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if epochs == 0 || batch_size == 0 {
        return Err(Error::BadConfig("epochs and batch_size must be ≥ 1".into()));
    }
    let mut u = vec![0.0; data.dim()];
    let idx: Vec<usize> = (0..data.len()).collect();
    let eta = cfg.step_size();
    for _ in 0..epochs {
        for batch in idx.chunks(batch_size) {
            let g = mean_input_gradient(net, data, batch, &u);
            for (ui, di) in u.iter_mut().zip(ascent_direction(&g, cfg.norm)) {
                *ui += eta * di;
            }
            project(&mut u, cfg.norm, cfg.delta);
        }
    }
    Ok(u)
}

/// Fraction of correctly classified examples whose prediction changes at `x + u`.
pub fn fooling_rate(net: &Network, data: &Dataset, u: &[f64], clip: Option<[f64; 2]>) -> f64 {
    let (correct, fooled) = data
        .inputs
        .par_iter()
        .zip(data.labels.par_iter())
        .map(|(x, &y)| {
            if net.predict(x) != y {
                return (0usize, 0usize);
            }
            let mut a = u.to_vec();
            clip_to_box(&mut a, x, clip);
            (1, usize::from(net.predict(&add(x, &a)) != y))
        })
        .reduce(|| (0, 0), |p, q| (p.0 + q.0, p.1 + q.1));
    if correct == 0 {
        0.0
    } else {
        fooled as f64 / correct as f64
    }
}

/// Mean fooling rate of `draws` random perturbations on the budget boundary
/// (random signs for ℓ∞, random directions for ℓ2).
pub fn random_fooling_rate(net: &Network, data: &Dataset, cfg: &AttackConfig, draws: usize) -> f64 {
    let mut rng = rng_for(cfg, u64::MAX);
    let mut total = 0.0;
    for _ in 0..draws.max(1) {
        let u = random_on_sphere(&mut rng, data.dim(), cfg.norm, cfg.delta);
        total += fooling_rate(net, data, &u, cfg.clip);
    }
    total / draws.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UaeOutcome {
    pub attack: String,
    pub norm: NormKind,
    pub delta: f64,
    pub perturbation: Vec<f64>,
    pub fooling_rate: f64,
    pub random_baseline_fooling_rate: f64,
}

pub fn evaluate_uae(
    net: &Network,
    fit: &Dataset,
    eval: &Dataset,
    cfg: &AttackConfig,
    epochs: usize,
    batch_size: usize,
) -> Result<UaeOutcome> {
    let u = uae_fgsm(net, fit, cfg, epochs, batch_size)?;
    Ok(UaeOutcome {
        attack: UAE_LABEL.to_string(),
        norm: cfg.norm,
        delta: cfg.delta,
        fooling_rate: fooling_rate(net, eval, &u, cfg.clip),
        random_baseline_fooling_rate: random_fooling_rate(net, eval, cfg, 10),
        perturbation: u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::softplus;

    fn linear(c: &[f64]) -> Network {
        Network::new(vec![], WeightMatrix::from_rows(&[c.to_vec()]).unwrap()).unwrap()
    }

    #[test]
    fn fgsm_linear_closed_form() {
        let c = [0.5, -1.5, 2.0, 0.25];
        let net = linear(&c);
        let x = [0.1, 0.2, -0.3, 0.4];
        let delta = 0.3;
        let cfg = AttackConfig::new(NormKind::Inf, delta);
        for label in [0, 1] {
            let y = if label == 1 { 1.0 } else { -1.0 };
            let a = fgsm(&net, &x, label, &cfg);
            assert!((crate::linalg::norm_inf(&a) - delta).abs() < 1e-15);
            let s = dot(&c, &x);
            let expected = softplus(-y * s + delta * crate::linalg::norm1(&c));
            let got = example_loss(&net, &add(&x, &a), label);
            assert!((got - expected).abs() < 1e-12);
            let p = pgd(&net, &x, label, &cfg, 0);
            assert!((example_loss(&net, &add(&x, &p), label) - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn fgsm_zero_budget_is_identity() {
        let net = linear(&[1.0, 2.0]);
        let a = fgsm(&net, &[0.3, 0.1], 1, &AttackConfig::new(NormKind::Two, 0.0));
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn l2_fgsm_has_budget_norm() {
        let net = Network::random(5, 6, 2, 1, 4);
        let cfg = AttackConfig::new(NormKind::Two, 0.7);
        let a = fgsm(&net, &[0.2, -0.1, 0.4, 1.0, 0.3], 0, &cfg);
        if a.iter().any(|v| *v != 0.0) {
            assert!((norm2(&a) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn pgd_feasible_and_dominant() {
        let net = Network::random(6, 8, 2, 1, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for norm in [NormKind::Inf, NormKind::Two] {
            let mut cfg = AttackConfig::new(norm, 0.4);
            cfg.steps = 10;
            cfg.restarts = 3;
            for i in 0..10 {
                let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = i % 2;
                let a = pgd(&net, &x, y, &cfg, i as u64);
                assert!(norm.norm(&a) <= 0.4 + 1e-9);
                let f = fgsm(&net, &x, y, &cfg);
                let lp = example_loss(&net, &add(&x, &a), y);
                let lf = example_loss(&net, &add(&x, &f), y);
                assert!(lp >= lf - 1e-12);
                assert!(lp >= example_loss(&net, &x, y) - 1e-12);
            }
        }
    }

    #[test]
    fn sweep_is_monotone() {
        let net = Network::random(4, 8, 2, 1, 2);
        let mut cfg = AttackConfig::new(NormKind::Two, 1.0);
        cfg.steps = 8;
        cfg.restarts = 2;
        let grid = [0.05, 0.1, 0.2, 0.4, 0.8];
        let out = pgd_sweep(&net, &[0.5, -0.2, 0.1, 0.9], 1, &cfg, &grid, 3).unwrap();
        for w in out.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        for ((a, _), d) in out.iter().zip(grid) {
            assert!(norm2(a) <= d + 1e-9);
        }
    }

    #[test]
    fn sv_alignment_examples() {
        let w = WeightMatrix::from_diag(&[3.0, 2.0, 1.0]).unwrap();
        let s = sv_alignment(&w, &[1.0, 0.0, 0.0], 1).unwrap();
        assert!((s.top_k_mass - 1.0).abs() < 1e-15);
        let s = sv_alignment(&w, &[0.0, 0.0, 2.0], 2).unwrap();
        assert_eq!(s.top_k_mass, 0.0);
        assert!(sv_alignment(&w, &[1.0], 1).is_err());
    }

    #[test]
    fn tiny_budget_keeps_accuracy() {
        let data = crate::data::gaussian_blobs(40, 3, 2, 2.0, 0.5, 1).unwrap();
        let net = Network::random(3, 4, 1, 1, 1);
        let mut cfg = AttackConfig::new(NormKind::Inf, 1e-12);
        cfg.steps = 3;
        cfg.restarts = 1;
        let out = evaluate_robustness(&net, &data, &cfg, Some(AlignmentProbe { layer: 0, k: 1 })).unwrap();
        assert_eq!(out.robust_accuracy, out.clean_accuracy);
        assert!(out.gap >= -1e-9);
    }

    #[test]
    fn uae_is_feasible_and_beats_noise() {
        let data = crate::data::gaussian_blobs(200, 4, 2, 1.5, 0.6, 2).unwrap();
        let c = [1.0, -1.0, 0.5, 0.2];
        let net = linear(&c);
        let mut cfg = AttackConfig::new(NormKind::Inf, 0.3);
        cfg.step_size = Some(0.05);
        let out = evaluate_uae(&net, &data, &data, &cfg, 3, 32).unwrap();
        assert!(crate::linalg::norm_inf(&out.perturbation) <= 0.3 + 1e-12);
        assert!(out.fooling_rate >= out.random_baseline_fooling_rate);
    }
}
