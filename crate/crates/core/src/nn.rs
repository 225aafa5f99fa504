//! Bias-free fully connected ReLU networks `g(x) = C φ(W^λ φ(… φ(W¹ x)))`
//! with hand-written reverse-mode gradients, structured regularizers, AdamW
//! and a seeded training loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{pgd, AttackConfig};
use crate::compress::{default_k, residual_ratio, row_l1_profile};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, norm2, singular_values, svd, WeightMatrix};

/// Examples per work unit when a batch is evaluated in parallel. Partial sums
/// are reduced in chunk order, so results do not depend on the thread count.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `log(1 + e^{−y s})` on a scalar score with `y ∈ {−1, +1}`.
    BinaryCe,
    SoftmaxCe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    hidden: Vec<WeightMatrix>,
    head: WeightMatrix,
}

/// Post-ReLU activations `z¹..z^λ` and the logits of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub activations: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

impl ForwardPass {
    /// The representation `Φ(x) = z^λ` (the input itself when λ = 0).
    pub fn features<'a>(&'a self, x: &'a [f64]) -> &'a [f64] {
        self.activations.last().map_or(x, Vec::as_slice)
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

impl Network {
    pub fn new(hidden: Vec<WeightMatrix>, head: WeightMatrix) -> Result<Self> {
        for (l, pair) in hidden.windows(2).enumerate() {
            if pair[1].cols() != pair[0].rows() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} outputs {} units but layer {} expects {}",
                    l,
                    pair[0].rows(),
                    l + 1,
                    pair[1].cols()
                )));
            }
        }
        if let Some(last) = hidden.last() {
            if head.cols() != last.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "head expects {} features, last layer has {}",
                    head.cols(),
                    last.rows()
                )));
            }
        }
        Ok(Self { hidden, head })
    }

    /// `depth` hidden layers of width `width` and a head with `outputs` rows,
    /// entries uniform in `±1/√fan_in`.
    pub fn random(input_dim: usize, width: usize, depth: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |rows: usize, cols: usize| {
            let b = 1.0 / (cols as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.random_range(-b..=b)).collect();
            WeightMatrix::new(rows, cols, data).expect("finite init")
        };
        let mut hidden = Vec::with_capacity(depth);
        let mut prev = input_dim;
        for _ in 0..depth {
            hidden.push(layer(width, prev));
            prev = width;
        }
        let head = layer(outputs, prev);
        Self { hidden, head }
    }

    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.first().unwrap_or(&self.head).cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.head.cols()
    }

    pub fn hidden(&self) -> &[WeightMatrix] {
        &self.hidden
    }

    pub fn hidden_mut(&mut self) -> &mut [WeightMatrix] {
        &mut self.hidden
    }

    pub fn head(&self) -> &WeightMatrix {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut WeightMatrix {
        &mut self.head
    }

    pub fn is_binary(&self) -> bool {
        self.head.rows() == 1
    }

    pub fn loss_kind(&self) -> LossKind {
        if self.is_binary() {
            LossKind::BinaryCe
        } else {
            LossKind::SoftmaxCe
        }
    }

    /// Parameters in a fixed order: hidden layers, then the head.
    pub fn params(&self) -> impl Iterator<Item = &WeightMatrix> {
        self.hidden.iter().chain(std::iter::once(&self.head))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut WeightMatrix> {
        self.hidden.iter_mut().chain(std::iter::once(&mut self.head))
    }

    /// The encoder `Φ` alone (head replaced by an identity read-out).
    pub fn encoder_layers(&self) -> &[WeightMatrix] {
        &self.hidden
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[f64]) -> ForwardPass {
        let mut activations = Vec::with_capacity(self.hidden.len());
        for w in &self.hidden {
            let input = activations.last().map_or(x, Vec::as_slice);
            let z: Vec<f64> = w.matvec(input).into_iter().map(relu).collect();
            activations.push(z);
        }
        let logits = self.head.matvec(activations.last().map_or(x, Vec::as_slice));
        ForwardPass {
            activations,
            logits,
        }
    }

    /// `Φ(x)`.
    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let mut z = x.to_vec();
        for w in &self.hidden {
            z = w.matvec(&z).into_iter().map(relu).collect();
        }
        z
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        predicted_class(&self.forward_unchecked(x).logits)
    }
}

pub fn predicted_class(logits: &[f64]) -> usize {
    if logits.len() == 1 {
        usize::from(logits[0] > 0.0)
    } else {
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        best
    }
}

/// Numerically stable `log(1 + e^t)`.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Maps a {0, 1} label to {−1, +1}.
pub fn signed_label(label: usize) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Loss of one example and its gradient with respect to the logits.
pub fn logit_loss(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    if logits.len() == 1 {
        let y = signed_label(label);
        let s = logits[0];
        (softplus(-y * s), vec![-y * sigmoid(-y * s)])
    } else {
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
        let total: f64 = exps.iter().sum();
        let loss = m + total.ln() - logits[label];
        let mut g: Vec<f64> = exps.iter().map(|e| e / total).collect();
        g[label] -= 1.0;
        (loss, g)
    }
}

fn check_label(net: &Network, label: usize) -> Result<()> {
    let classes = if net.is_binary() { 2 } else { net.head.rows() };
    if label >= classes {
        return Err(Error::ShapeMismatch(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Gradients of every parameter, in the layout of [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<WeightMatrix>,
    pub head: WeightMatrix,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            hidden: net
                .hidden
                .iter()
                .map(|w| WeightMatrix::zeros(w.rows(), w.cols()))
                .collect(),
            head: WeightMatrix::zeros(net.head.rows(), net.head.cols()),
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &WeightMatrix> {
        self.hidden.iter().chain(std::iter::once(&self.head))
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut WeightMatrix> {
        self.hidden.iter_mut().chain(std::iter::once(&mut self.head))
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.params_mut().zip(other.params()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.params_mut() {
            a.data_mut().iter_mut().for_each(|x| *x *= alpha);
        }
    }
}

fn add_outer(acc: &mut WeightMatrix, u: &[f64], v: &[f64]) {
    for (i, ui) in u.iter().enumerate() {
        if *ui == 0.0 {
            continue;
        }
        for (a, vj) in acc.row_mut(i).iter_mut().zip(v) {
            *a += ui * vj;
        }
    }
}

/// Back-propagates `g_logits` through the head and hidden layers. Adds the
/// parameter gradients to `acc` when given and returns the input gradient.
fn backward(
    net: &Network,
    x: &[f64],
    pass: &ForwardPass,
    g_logits: &[f64],
    acc: Option<&mut Gradients>,
) -> Vec<f64> {
    let mut acc = acc;
    let feats = pass.features(x);
    if let Some(a) = acc.as_deref_mut() {
        add_outer(&mut a.head, g_logits, feats);
    }
    let mut g = net.head.matvec_t(g_logits);
    for l in (0..net.hidden.len()).rev() {
        let z = &pass.activations[l];
        for (gi, zi) in g.iter_mut().zip(z) {
            if *zi <= 0.0 {
                *gi = 0.0;
            }
        }
        let input = if l == 0 { x } else { &pass.activations[l - 1] };
        if let Some(a) = acc.as_deref_mut() {
            add_outer(&mut a.hidden[l], &g, input);
        }
        g = net.hidden[l].matvec_t(&g);
    }
    g
}

/// Loss of one example and its input gradient.
pub fn input_gradient(net: &Network, x: &[f64], label: usize) -> (f64, Vec<f64>) {
    let pass = net.forward_unchecked(x);
    let (loss, g) = logit_loss(&pass.logits, label);
    (loss, backward(net, x, &pass, &g, None))
}

pub fn example_loss(net: &Network, x: &[f64], label: usize) -> f64 {
    logit_loss(&net.forward_unchecked(x).logits, label).0
}

/// Vector-Jacobian product of the encoder: `J_Φ(x)ᵀ g`.
pub fn encoder_vjp(net: &Network, x: &[f64], g: &[f64]) -> Vec<f64> {
    let mut acts = Vec::with_capacity(net.hidden.len());
    for w in &net.hidden {
        let input = acts.last().map_or(x, Vec::as_slice);
        let z: Vec<f64> = w.matvec(input).into_iter().map(relu).collect();
        acts.push(z);
    }
    let mut g = g.to_vec();
    for l in (0..net.hidden.len()).rev() {
        for (gi, zi) in g.iter_mut().zip(&acts[l]) {
            if *zi <= 0.0 {
                *gi = 0.0;
            }
        }
        g = net.hidden[l].matvec_t(&g);
    }
    g
}

/// Mean loss over a batch, mean parameter gradients, and for each example
/// the gradient of its own loss with respect to its input.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub loss: f64,
    pub params: Gradients,
    pub inputs: Vec<Vec<f64>>,
}

pub fn loss_and_grads(net: &Network, inputs: &[Vec<f64>], labels: &[usize]) -> Result<BatchGradients> {
    if inputs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (x, &y) in inputs.iter().zip(labels) {
        if x.len() != net.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has length {}, network expects {}",
                x.len(),
                net.input_dim()
            )));
        }
        check_label(net, y)?;
    }
    let idx: Vec<usize> = (0..inputs.len()).collect();
    let partials: Vec<(f64, Gradients, Vec<Vec<f64>>)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Gradients::zeros_like(net);
            let mut loss = 0.0;
            let mut gin = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let pass = net.forward_unchecked(&inputs[i]);
                let (l, g) = logit_loss(&pass.logits, labels[i]);
                loss += l;
                gin.push(backward(net, &inputs[i], &pass, &g, Some(&mut acc)));
            }
            (loss, acc, gin)
        })
        .collect();
    let n = inputs.len() as f64;
    let mut total = 0.0;
    let mut params = Gradients::zeros_like(net);
    let mut input_grads = Vec::with_capacity(inputs.len());
    for (l, g, gin) in partials {
        total += l;
        params.add_assign(&g);
        input_grads.extend(gin);
    }
    params.scale(1.0 / n);
    Ok(BatchGradients {
        loss: total / n,
        params,
        inputs: input_grads,
    })
}

/// Mean loss and accuracy over a dataset.
pub fn evaluate(net: &Network, data: &Dataset) -> (f64, f64) {
    if data.is_empty() {
        return (0.0, 0.0);
    }
    let per: Vec<(f64, bool)> = data
        .inputs
        .par_iter()
        .zip(data.labels.par_iter())
        .map(|(x, &y)| {
            let logits = net.forward_unchecked(x).logits;
            (logit_loss(&logits, y).0, predicted_class(&logits) == y)
        })
        .collect();
    let n = per.len() as f64;
    let loss = per.iter().map(|p| p.0).sum::<f64>() / n;
    let acc = per.iter().filter(|p| p.1).count() as f64 / n;
    (loss, acc)
}

pub fn accuracy(net: &Network, data: &Dataset) -> f64 {
    evaluate(net, data).1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    /// Sum of row ℓ2 norms.
    GroupLasso,
    /// Ratio of the ℓ1 and ℓ2 norms of the row-norm vector.
    RatioLasso,
    /// Sum of singular values.
    Nuclear,
    /// Variance of the largest row ℓ2 norms.
    SpreadVariance,
    /// Sum of absolute entries.
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub strength: f64,
    #[serde(default = "default_top_fraction")]
    pub top_fraction: f64,
}

fn default_top_fraction() -> f64 {
    0.05
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind, strength: f64) -> Self {
        Self {
            kind,
            strength,
            top_fraction: default_top_fraction(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::BadConfig(format!(
                "regularizer strength must be finite and ≥ 0, got {}",
                self.strength
            )));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::BadConfig(format!(
                "top_fraction must lie in (0, 1], got {}",
                self.top_fraction
            )));
        }
        Ok(())
    }
}

fn row_l2_norms(w: &WeightMatrix) -> Vec<f64> {
    (0..w.rows()).map(|i| norm2(w.row(i))).collect()
}

/// Unscaled penalty of one matrix and its (sub)gradient.
pub fn penalty_value_grad(
    kind: RegularizerKind,
    w: &WeightMatrix,
    top_fraction: f64,
) -> Result<(f64, WeightMatrix)> {
    let mut g = WeightMatrix::zeros(w.rows(), w.cols());
    let value = match kind {
        RegularizerKind::GroupLasso => {
            let norms = row_l2_norms(w);
            for (i, n) in norms.iter().enumerate() {
                if *n > 0.0 {
                    for (gj, wj) in g.row_mut(i).iter_mut().zip(w.row(i)) {
                        *gj = wj / n;
                    }
                }
            }
            norms.iter().sum()
        }
        RegularizerKind::RatioLasso => {
            let norms = row_l2_norms(w);
            let s1: f64 = norms.iter().sum();
            let s2 = norm2(&norms);
            if s2 == 0.0 {
                return Ok((0.0, g));
            }
            let s2_cubed = s2 * s2 * s2;
            for (i, n) in norms.iter().enumerate() {
                let own = if *n > 0.0 { 1.0 / (n * s2) } else { 0.0 };
                for (gj, wj) in g.row_mut(i).iter_mut().zip(w.row(i)) {
                    *gj = wj * own - s1 * wj / s2_cubed;
                }
            }
            s1 / s2
        }
        RegularizerKind::Nuclear => {
            let f = svd(w)?;
            for r in 0..f.rank_capacity() {
                let u = f.left_vector(r);
                let v = f.right_vector(r);
                add_outer(&mut g, &u, &v);
            }
            f.singular_values.iter().sum()
        }
        RegularizerKind::SpreadVariance => {
            let norms = row_l2_norms(w);
            let m = ((top_fraction * w.rows() as f64).ceil() as usize).clamp(1, w.rows());
            let top = crate::compress::top_k_indices(&norms, m);
            let mean = top.iter().map(|&i| norms[i]).sum::<f64>() / m as f64;
            let var = top.iter().map(|&i| (norms[i] - mean).powi(2)).sum::<f64>() / m as f64;
            for &i in &top {
                let t = norms[i];
                if t > 0.0 {
                    let c = 2.0 / m as f64 * (t - mean) / t;
                    for (gj, wj) in g.row_mut(i).iter_mut().zip(w.row(i)) {
                        *gj = c * wj;
                    }
                }
            }
            var
        }
        RegularizerKind::L1 => {
            for (gj, wj) in g.data_mut().iter_mut().zip(w.data()) {
                *gj = if *wj > 0.0 {
                    1.0
                } else if *wj < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
            w.data().iter().map(|v| v.abs()).sum()
        }
    };
    Ok((value, g))
}

/// `strength × penalty` summed over hidden layers, and its gradient per hidden
/// layer. The head is not regularized.
pub fn regularizer_value_grad(spec: &RegularizerSpec, net: &Network) -> Result<(f64, Vec<WeightMatrix>)> {
    spec.validate()?;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(net.depth());
    for w in &net.hidden {
        if spec.strength == 0.0 {
            grads.push(WeightMatrix::zeros(w.rows(), w.cols()));
            continue;
        }
        let (v, g) = penalty_value_grad(spec.kind, w, spec.top_fraction)?;
        value += spec.strength * v;
        grads.push(g.scaled(spec.strength));
    }
    Ok((value, grads))
}

/// Rescales `w` to Frobenius norm `c`.
pub fn frobenius_project(w: &WeightMatrix, c: f64) -> Result<WeightMatrix> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::BadConfig(format!("target norm must be positive, got {c}")));
    }
    let n = frobenius_norm(w);
    if n == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    if n == c {
        return Ok(w.clone());
    }
    Ok(w.scaled(c / n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(net: &Network, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Vec<f64>> = net.params().map(|p| vec![0.0; p.data().len()]).collect();
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    /// Decoupled weight decay followed by the bias-corrected Adam update.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let decay = 1.0 - self.lr * self.weight_decay;
        for ((p, g), (m, v)) in net
            .params_mut()
            .zip(grads.params())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((theta, gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *theta *= decay;
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *theta -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialTraining {
    pub attack: AttackConfig,
    /// Fraction of each minibatch replaced by attacked examples.
    #[serde(default = "default_adv_ratio")]
    pub ratio: f64,
}

fn default_adv_ratio() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub regularizers: Vec<RegularizerSpec>,
    /// Per hidden layer Frobenius norm to project onto after every step.
    pub frobenius_targets: Vec<Option<f64>>,
    pub adversarial: Option<AdversarialTraining>,
    /// Epochs without validation improvement before stopping; `None` disables.
    pub patience: Option<usize>,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 0.01,
            batch_size: 64,
            max_epochs: 100,
            seed: 0,
            regularizers: Vec::new(),
            frobenius_targets: Vec::new(),
            adversarial: None,
            patience: Some(10),
            validation_fraction: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, net: &Network) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::BadConfig("learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::BadConfig("weight_decay must be ≥ 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::BadConfig("batch_size must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::BadConfig("validation_fraction must lie in [0, 1)".into()));
        }
        for r in &self.regularizers {
            r.validate()?;
        }
        if self.frobenius_targets.len() > net.depth() {
            return Err(Error::BadConfig(format!(
                "{} Frobenius targets for {} hidden layers",
                self.frobenius_targets.len(),
                net.depth()
            )));
        }
        if self.frobenius_targets.iter().flatten().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::BadConfig("Frobenius targets must be positive".into()));
        }
        if let Some(adv) = &self.adversarial {
            if !(0.0..=1.0).contains(&adv.ratio) {
                return Err(Error::BadConfig("adversarial ratio must lie in [0, 1]".into()));
            }
            adv.attack.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub clean_acc: f64,
    pub robust_acc: Option<f64>,
    /// Mean over hidden layers of the spectral residual at `k = ceil(0.1·h)`.
    pub eps_sigma: Option<f64>,
    /// Mean over hidden layers of the row residual at `k = ceil(0.1·h)`.
    pub eps_nu: Option<f64>,
    pub frobenius_norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Mean spectral and row residual ratios over hidden layers at the default k.
pub fn layer_residual_means(net: &Network) -> Result<(Option<f64>, Option<f64>)> {
    if net.depth() == 0 {
        return Ok((None, None));
    }
    let mut es = 0.0;
    let mut en = 0.0;
    for w in net.hidden() {
        let sigma = singular_values(w)?;
        let (nu, _) = row_l1_profile(w);
        es += residual_ratio(&sigma, 1.0, default_k(sigma.len())).unwrap_or(0.0);
        en += residual_ratio(&nu, 1.0, default_k(nu.len())).unwrap_or(0.0);
    }
    let n = net.depth() as f64;
    Ok((Some(es / n), Some(en / n)))
}

fn project_layers(net: &mut Network, targets: &[Option<f64>]) -> Result<()> {
    for (w, t) in net.hidden.iter_mut().zip(targets) {
        if let Some(c) = t {
            *w = frobenius_project(w, *c)?;
        }
    }
    Ok(())
}

/// Robust accuracy of `net` on `data` under `attack`.
pub fn robust_accuracy(net: &Network, data: &Dataset, attack: &AttackConfig) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits: usize = data
        .inputs
        .par_iter()
        .zip(data.labels.par_iter())
        .enumerate()
        .map(|(i, (x, &y))| {
            let a = pgd(net, x, y, attack, i as u64);
            let adv: Vec<f64> = x.iter().zip(&a).map(|(u, v)| u + v).collect();
            usize::from(net.predict(&adv) == y)
        })
        .sum();
    hits as f64 / data.len() as f64
}

/// Trains a copy of `net`. Deterministic for a given `cfg.seed`.
pub fn train(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<(Network, History)> {
    cfg.validate(net)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != net.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "data dimension {} but network input {}",
            data.dim(),
            net.input_dim()
        )));
    }
    let outputs_ok = if net.is_binary() {
        data.num_classes == 2
    } else {
        net.head().rows() == data.num_classes
    };
    if !outputs_ok {
        return Err(Error::BadConfig(format!(
            "head has {} outputs for a {}-class task",
            net.head().rows(),
            data.num_classes
        )));
    }

    let (train_set, val_set) = data.split(cfg.validation_fraction, cfg.seed);
    let monitor = if val_set.is_empty() { &train_set } else { &val_set };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut net = net.clone();
    project_layers(&mut net, &cfg.frobenius_targets)?;
    let mut opt = AdamW::new(&net, cfg.learning_rate, cfg.weight_decay);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, Network)> = None;
    let mut since_best = 0usize;
    let mut attack_counter: u64 = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut inputs: Vec<Vec<f64>> = batch.iter().map(|&i| train_set.inputs[i].clone()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train_set.labels[i]).collect();
            if let Some(adv) = &cfg.adversarial {
                let count = ((adv.ratio * batch.len() as f64).ceil() as usize).min(batch.len());
                let base = attack_counter;
                attack_counter += count as u64;
                let attacked: Vec<Vec<f64>> = (0..count)
                    .into_par_iter()
                    .map(|j| {
                        let a = pgd(&net, &inputs[j], labels[j], &adv.attack, base + j as u64);
                        inputs[j].iter().zip(&a).map(|(x, d)| x + d).collect()
                    })
                    .collect();
                for (j, x) in attacked.into_iter().enumerate() {
                    inputs[j] = x;
                }
            }
            let mut bg = loss_and_grads(&net, &inputs, &labels)?;
            let mut objective = bg.loss;
            for spec in &cfg.regularizers {
                let (v, gs) = regularizer_value_grad(spec, &net)?;
                objective += v;
                for (acc, g) in bg.params.hidden.iter_mut().zip(&gs) {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
            }
            opt.step(&mut net, &bg.params);
            project_layers(&mut net, &cfg.frobenius_targets)?;
            for p in net.params() {
                p.check_finite()?;
            }
            loss_sum += objective * batch.len() as f64;
            seen += batch.len();
        }

        let (val_loss, clean_acc) = evaluate(&net, monitor);
        let robust_acc = cfg
            .adversarial
            .as_ref()
            .map(|adv| robust_accuracy(&net, monitor, &adv.attack));
        let (eps_sigma, eps_nu) = layer_residual_means(&net)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            val_loss,
            clean_acc,
            robust_acc,
            eps_sigma,
            eps_nu,
            frobenius_norms: net.hidden().iter().map(frobenius_norm).collect(),
        });

        let improved = best.as_ref().is_none_or(|(b, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, net.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if let Some(p) = cfg.patience {
            if since_best >= p {
                history.stopped_early = true;
                break;
            }
        }
    }

    let out = match (cfg.patience, best) {
        (Some(_), Some((_, b))) => b,
        _ => {
            history.best_epoch = history.epochs.len();
            net
        }
    };
    Ok((out, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> WeightMatrix {
        WeightMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn forward_examples() {
        let net = Network::new(vec![WeightMatrix::zeros(3, 3)], WeightMatrix::zeros(2, 3)).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]).unwrap().logits, vec![0.0, 0.0]);

        let c = m(&[vec![1.0, -2.0, 0.5]]);
        let net = Network::new(vec![WeightMatrix::identity(3); 2], c.clone()).unwrap();
        let x = [0.5, 1.0, 2.0];
        assert_eq!(net.forward(&x).unwrap().logits, c.matvec(&x));

        let net = Network::new(vec![m(&[vec![1.0, -1.0], vec![0.0, 2.0]])], m(&[vec![1.0, 1.0]])).unwrap();
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap().activations[0], vec![0.0, 2.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn shape_validation() {
        assert!(Network::new(vec![WeightMatrix::zeros(3, 2), WeightMatrix::zeros(3, 4)], WeightMatrix::zeros(1, 3)).is_err());
        assert!(Network::new(vec![WeightMatrix::zeros(3, 2)], WeightMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn linear_binary_input_gradient_closed_form() {
        let c = [0.3, -1.2, 2.0];
        let net = Network::new(vec![], m(&[c.to_vec()])).unwrap();
        let x = [1.0, 0.5, -0.25];
        for label in [0, 1] {
            let y = signed_label(label);
            let s: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            let (_, g) = input_gradient(&net, &x, label);
            let coef = -y * sigmoid(-y * s);
            for (gi, ci) in g.iter().zip(&c) {
                assert_eq!(*gi, coef * ci);
            }
        }
    }

    #[test]
    fn dead_relu_gives_zero_input_gradient() {
        let net = Network::new(vec![WeightMatrix::identity(2)], m(&[vec![1.0, 1.0]])).unwrap();
        let (_, g) = input_gradient(&net, &[-1.0, -2.0], 1);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn nuclear_on_diagonal() {
        let d = WeightMatrix::from_diag(&[3.0, 1.0]).unwrap();
        let (v, g) = penalty_value_grad(RegularizerKind::Nuclear, &d, 0.05).unwrap();
        assert!((v - 4.0).abs() < 1e-14);
        let id = WeightMatrix::identity(2);
        assert!(frobenius_norm(&g.sub(&id).unwrap()) < 1e-12);
    }

    #[test]
    fn zero_strength_is_inert() {
        let net = Network::random(4, 4, 2, 1, 1);
        for kind in [
            RegularizerKind::GroupLasso,
            RegularizerKind::RatioLasso,
            RegularizerKind::Nuclear,
            RegularizerKind::SpreadVariance,
            RegularizerKind::L1,
        ] {
            let (v, gs) = regularizer_value_grad(&RegularizerSpec::new(kind, 0.0), &net).unwrap();
            assert_eq!(v, 0.0);
            assert!(gs.iter().all(|g| g.data().iter().all(|x| *x == 0.0)));
        }
    }

    #[test]
    fn spread_variance_equal_rows_is_zero() {
        let w = m(&[vec![1.0, 0.0], vec![0.0, -1.0], vec![0.6, 0.8]]);
        let (v, _) = penalty_value_grad(RegularizerKind::SpreadVariance, &w, 1.0).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn frobenius_projection() {
        let p = frobenius_project(&WeightMatrix::identity(2), 1.0).unwrap();
        assert!((p.get(0, 0) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let w = m(&[vec![3.0, 4.0]]);
        assert_eq!(frobenius_project(&w, 5.0).unwrap(), w);
        assert!(matches!(frobenius_project(&WeightMatrix::zeros(2, 2), 1.0), Err(Error::ZeroMatrix)));
    }

    fn scalar_net(v: f64) -> Network {
        Network::new(vec![], m(&[vec![v]])).unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            hidden: vec![],
            head: m(&[vec![g]]),
        }
    }

    #[test]
    fn adamw_examples() {
        let mut net = scalar_net(0.7);
        let mut opt = AdamW::new(&net, 1e-3, 0.0);
        opt.step(&mut net, &scalar_grad(0.0));
        assert_eq!(net.head().get(0, 0), 0.7);

        let mut net = scalar_net(0.7);
        let mut opt = AdamW::new(&net, 1e-3, 0.0);
        let g = 0.25;
        opt.step(&mut net, &scalar_grad(g));
        // bias-corrected moments equal g and g² after one step
        let expected = 0.7 - 1e-3 * g / (g.abs() + 1e-8);
        assert!((net.head().get(0, 0) - expected).abs() < 1e-16);

        let mut net = scalar_net(2.0);
        let mut opt = AdamW::new(&net, 0.1, 0.01);
        opt.step(&mut net, &scalar_grad(0.0));
        assert_eq!(net.head().get(0, 0), 2.0 * (1.0 - 0.1 * 0.01));
    }

    #[test]
    fn regularizer_directional_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for kind in [
            RegularizerKind::GroupLasso,
            RegularizerKind::RatioLasso,
            RegularizerKind::Nuclear,
            RegularizerKind::SpreadVariance,
            RegularizerKind::L1,
        ] {
            for _ in 0..5 {
                let w = WeightMatrix::new(5, 4, (0..20).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
                let dir = WeightMatrix::new(5, 4, (0..20).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
                let (_, g) = penalty_value_grad(kind, &w, 0.4).unwrap();
                let h = 1e-6;
                let plus = w.sub(&dir.scaled(-h)).unwrap();
                let minus = w.sub(&dir.scaled(h)).unwrap();
                let fd = (penalty_value_grad(kind, &plus, 0.4).unwrap().0
                    - penalty_value_grad(kind, &minus, 0.4).unwrap().0)
                    / (2.0 * h);
                let an: f64 = g.data().iter().zip(dir.data()).map(|(a, b)| a * b).sum();
                assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-2), "{kind:?}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn training_separates_blobs() {
        let data = crate::data::gaussian_blobs(400, 2, 2, 4.0, 0.5, 3).unwrap();
        let net = Network::random(2, 16, 1, 1, 3);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            max_epochs: 50,
            batch_size: 32,
            seed: 3,
            ..TrainConfig::default()
        };
        let (trained, hist) = train(&net, &data, &cfg).unwrap();
        assert!(accuracy(&trained, &data) >= 0.99);
        assert!(!hist.epochs.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_projects() {
        let data = crate::data::gaussian_blobs(200, 4, 2, 2.0, 1.0, 5).unwrap();
        let net = Network::random(4, 4, 2, 1, 5);
        let cfg = TrainConfig {
            max_epochs: 5,
            batch_size: 16,
            seed: 11,
            frobenius_targets: vec![Some(1.5), None],
            regularizers: vec![RegularizerSpec::new(RegularizerKind::Nuclear, 1e-2)],
            ..TrainConfig::default()
        };
        let (a, ha) = train(&net, &data, &cfg).unwrap();
        let (b, hb) = train(&net, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        for rec in &ha.epochs {
            assert!((rec.frobenius_norms[0] - 1.5).abs() <= 1e-10 * 1.5);
        }
    }
}
