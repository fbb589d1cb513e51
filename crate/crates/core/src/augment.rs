//! Feature-level Mixup.
//!
//! A batch is mixed with a shuffled copy of itself using one coefficient
//! `λ ~ Beta(α, α)`; the loss interpolates between the two label vectors
//! with the same `λ`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixupConfig {
    pub alpha: f64,
    pub enabled: bool,
}

impl MixupConfig {
    pub const DISABLED: MixupConfig = MixupConfig {
        alpha: 1.0,
        enabled: false,
    };

    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::NonPositiveAlpha(self.alpha));
        }
        Ok(())
    }
}

impl Default for MixupConfig {
    fn default() -> Self {
        Self::DISABLED
    }
}

/// A mixed batch and the two label orders it interpolates.
#[derive(Debug, Clone, PartialEq)]
pub struct MixupBatch {
    pub mixed_features: Matrix<f32>,
    pub labels_i: Vec<usize>,
    pub labels_j: Vec<usize>,
    pub lambda: f64,
    pub permutation: Vec<usize>,
}

impl MixupBatch {
    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// Mixes another modality of the same rows with this batch's `λ` and
    /// permutation.
    pub fn mix_other(&self, features: &Matrix<f32>) -> Result<Matrix<f32>> {
        if features.rows() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "batch has {} rows, other modality {}",
                self.len(),
                features.rows()
            )));
        }
        Ok(convex_mix(features, &self.permutation, self.lambda))
    }

    /// `values` reordered by the partner permutation.
    pub fn partner<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.permutation
            .iter()
            .map(|&p| values[p].clone())
            .collect()
    }
}

/// Draws `λ ~ Beta(α, α)`.
pub fn sample_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    let beta = Beta::new(alpha, alpha).map_err(|_| Error::NonPositiveAlpha(alpha))?;
    Ok(beta.sample(rng).clamp(0.0, 1.0))
}

/// `λ·x_i + (1−λ)·x_{π(i)}` for every row. The combination is formed in f64
/// and rounded once, so each entry stays within its two source values.
fn convex_mix(features: &Matrix<f32>, permutation: &[usize], lambda: f64) -> Matrix<f32> {
    let mut out = Matrix::zeros(features.rows(), features.cols());
    for (i, &j) in permutation.iter().enumerate() {
        let (xi, xj) = (features.row(i), features.row(j));
        for ((o, &a), &b) in out.row_mut(i).iter_mut().zip(xi).zip(xj) {
            *o = (lambda * f64::from(a) + (1.0 - lambda) * f64::from(b)) as f32;
        }
    }
    out
}

/// Mixes a batch with a uniformly shuffled copy of itself.
///
/// When `config.enabled` is false the batch is returned unchanged with
/// `λ = 1` and the identity permutation, and no randomness is consumed.
pub fn mix_batch<R: Rng + ?Sized>(
    features: &Matrix<f32>,
    labels: &[usize],
    config: &MixupConfig,
    rng: &mut R,
) -> Result<MixupBatch> {
    let b = features.rows();
    if b == 0 {
        return Err(Error::EmptyBatch);
    }
    if labels.len() != b {
        return Err(Error::ShapeMismatch(format!(
            "{b} rows but {} labels",
            labels.len()
        )));
    }
    if !features.is_finite() {
        return Err(Error::NonFiniteOutput("mixup input"));
    }
    config.validate()?;
    let mut permutation: Vec<usize> = (0..b).collect();
    if !config.enabled {
        return Ok(MixupBatch {
            mixed_features: features.clone(),
            labels_i: labels.to_vec(),
            labels_j: labels.to_vec(),
            lambda: 1.0,
            permutation,
        });
    }
    let lambda = sample_lambda(config.alpha, rng)?;
    permutation.shuffle(rng);
    let labels_j = permutation.iter().map(|&p| labels[p]).collect();
    Ok(MixupBatch {
        mixed_features: convex_mix(features, &permutation, lambda),
        labels_i: labels.to_vec(),
        labels_j,
        lambda,
        permutation,
    })
}

/// `λ·L(pred, y_i) + (1−λ)·L(pred, y_j)`.
pub fn mixup_loss<P, F>(
    mut per_target_loss: F,
    predictions: &Matrix<P>,
    batch: &MixupBatch,
) -> Result<f64>
where
    P: Copy + Default,
    F: FnMut(&Matrix<P>, &[usize]) -> Result<f64>,
{
    if predictions.rows() != batch.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} prediction rows for a batch of {}",
            predictions.rows(),
            batch.len()
        )));
    }
    let li = per_target_loss(predictions, &batch.labels_i)?;
    let lj = per_target_loss(predictions, &batch.labels_j)?;
    Ok(batch.lambda * li + (1.0 - batch.lambda) * lj)
}
