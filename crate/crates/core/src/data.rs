//! In-memory datasets and deterministic synthetic generators.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labelled examples. Labels are class indices in `0..num_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::BadSpec(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(first) = inputs.first() {
            let d = first.len();
            if d == 0 || inputs.iter().any(|x| x.len() != d) {
                return Err(Error::BadSpec("inputs must share a positive dimension".into()));
            }
            if inputs.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dataset input".into()));
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::BadSpec(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            inputs,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Shuffled split into (first, second) with `second` holding
    /// `round(fraction·n)` examples (at least one when `n ≥ 2` and `fraction > 0`).
    pub fn split(&self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut m = (fraction * n as f64).round() as usize;
        if fraction > 0.0 && n >= 2 {
            m = m.clamp(1, n - 1);
        }
        let m = m.min(n);
        let (a, b) = idx.split_at(n - m);
        (self.subset(a), self.subset(b))
    }

    pub fn map_labels(&self, map: LabelMap) -> Result<Dataset> {
        match map {
            LabelMap::Binary { threshold } => Dataset::new(
                self.inputs.clone(),
                self.labels.iter().map(|&l| usize::from(l >= threshold)).collect(),
                2,
            ),
        }
    }

    /// Smallest and largest input coordinate.
    pub fn value_range(&self) -> (f64, f64) {
        self.inputs
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

/// Collapses class indices into two classes: labels below `threshold` become
/// 0, the rest 1. `threshold = 5` maps digits 0–4 to 0 and 5–9 to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelMap {
    Binary { threshold: usize },
}

impl LabelMap {
    pub const DIGITS: LabelMap = LabelMap::Binary { threshold: 5 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    GaussianBlobs {
        samples: usize,
        dim: usize,
        classes: usize,
        separation: f64,
        noise: f64,
    },
    TwoMoons {
        samples: usize,
        noise: f64,
    },
    MnistIdx {
        images: String,
        labels: String,
        #[serde(default)]
        limit: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub source: DatasetSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub label_map: Option<LabelMap>,
}

/// Builds the dataset described by `spec`. IDX sources read from disk.
pub fn generate_synthetic(spec: &DatasetSpec) -> Result<Dataset> {
    let base = match &spec.source {
        DatasetSource::GaussianBlobs {
            samples,
            dim,
            classes,
            separation,
            noise,
        } => gaussian_blobs(*samples, *dim, *classes, *separation, *noise, spec.seed)?,
        DatasetSource::TwoMoons { samples, noise } => two_moons(*samples, *noise, spec.seed)?,
        DatasetSource::MnistIdx {
            images,
            labels,
            limit,
        } => {
            let d = crate::io::parse_idx(images.as_ref(), labels.as_ref(), None)?;
            match limit {
                Some(n) => d.take(*n),
                None => d,
            }
        }
    };
    match spec.label_map {
        Some(m) => base.map_labels(m),
        None => Ok(base),
    }
}

/// Isotropic Gaussian clusters. Cluster means are random unit directions
/// scaled to `separation`; labels are assigned round-robin so classes are
/// balanced.
pub fn gaussian_blobs(
    samples: usize,
    dim: usize,
    classes: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if samples == 0 || dim == 0 || classes < 2 {
        return Err(Error::BadSpec(
            "gaussian_blobs needs samples ≥ 1, dim ≥ 1, classes ≥ 2".into(),
        ));
    }
    if !(separation.is_finite() && separation >= 0.0 && noise.is_finite() && noise >= 0.0) {
        return Err(Error::BadSpec("separation and noise must be finite and ≥ 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = crate::linalg::norm2(&v).max(f64::MIN_POSITIVE);
            v.iter_mut().for_each(|x| *x *= separation / n);
            v
        })
        .collect();
    let mut inputs = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let c = i % classes;
        let x = means[c]
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + noise * z
            })
            .collect();
        inputs.push(x);
        labels.push(c);
    }
    Dataset::new(inputs, labels, classes)
}

/// Two interleaving half circles in the plane. Class 0 lies on
/// `(cos t, sin t)`, class 1 on `(1 − cos t, 0.5 − sin t)`, `t ∈ [0, π]`.
pub fn two_moons(samples: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if samples < 2 || !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::BadSpec("two_moons needs samples ≥ 2 and noise ≥ 0".into()));
    }
    let n_out = samples / 2;
    let n_in = samples - n_out;
    let arc = |i: usize, n: usize| {
        if n == 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (n - 1) as f64
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<(Vec<f64>, usize)> = Vec::with_capacity(samples);
    for i in 0..n_out {
        let t = arc(i, n_out);
        points.push((vec![t.cos(), t.sin()], 0));
    }
    for i in 0..n_in {
        let t = arc(i, n_in);
        points.push((vec![1.0 - t.cos(), 0.5 - t.sin()], 1));
    }
    points.shuffle(&mut rng);
    if noise > 0.0 {
        for (x, _) in points.iter_mut() {
            for v in x.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += noise * z;
            }
        }
    }
    let (inputs, labels) = points.into_iter().unzip();
    Dataset::new(inputs, labels, 2)
}
