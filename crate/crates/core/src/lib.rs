//! Few-shot, class-imbalanced classification over precomputed embeddings.
//!
//! The crate is organised around the training and evaluation pipeline:
//!
//! - [`dataio`]: the `EMB1` embedding container, line-JSON metadata, label
//!   spaces, taxonomy trees and synthetic long-tail datasets.
//! - [`sampling`]: inverse-class-frequency weighted sampling and batch plans.
//! - [`augment`]: feature-level Mixup.
//! - [`model`]: linear, image+text fusion and multi-task heads with
//!   hand-written backward passes, plus the checkpoint container.
//! - [`optim`]: Adam, the early-stopping training loop and GradNorm.
//! - [`eval`]: top-k metrics, per-class breakdowns, ablation and α-sweep
//!   runners, and CSV report writers.
//! - [`zeroshot`]: the three-round family → genus → species prompting
//!   protocol over a pluggable completion client.

pub mod augment;
pub mod dataio;
mod error;
pub mod eval;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod rng;
pub mod sampling;
pub mod zeroshot;

pub use error::{Error, Result};
pub use matrix::Matrix;
