//! Structured compressibility of ReLU networks and its effect on adversarial
//! robustness.
//!
//! The crate measures how compressible a layer is (row sparsity, spectral
//! decay), turns those measurements into operator-norm and Lipschitz upper
//! bounds, trains small fully connected networks with compressibility
//! regularizers, attacks them, and prunes them.
//!
//! Modules, bottom-up:
//! - [`linalg`]: matrices, norms, one-sided Jacobi SVD.
//! - [`compress`]: top-k residuals, spread, PQ-index, structure vectors.
//! - [`bounds`]: layer bounds, alignment factors, Lipschitz and risk bounds.
//! - [`nn`]: networks, gradients, regularizers, AdamW, training.
//! - [`attack`]: FGSM, PGD, universal perturbations, diagnostics.
//! - [`prune`]: row/spectral pruning and ε-targeted global plans.
//! - [`data`], [`io`], [`report`]: datasets, file formats, JSON/CSV output.

pub mod attack;
pub mod bounds;
pub mod compress;
pub mod data;
pub mod error;
pub mod io;
pub mod linalg;
pub mod nn;
pub mod prune;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{NormKind, WeightMatrix};
pub use nn::Network;
