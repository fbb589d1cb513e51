//! Inverse-class-frequency weighted sampling and epoch batch plans.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataio::LabelSpace;
use crate::rng::{self, domain};
use crate::{Error, Result};

/// Per-row sampling weights, aligned with the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights(Vec<f64>);

impl SampleWeights {
    /// Wraps raw weights; every weight must be finite and strictly positive.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "sample weight {i} is {}, weights must be positive",
                weights[i]
            )));
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Normalized cumulative distribution; the last entry is exactly 1.
    fn cdf(&self) -> Vec<f64> {
        let total: f64 = self.0.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = self
            .0
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        cdf
    }
}

/// Index lists for one epoch; every list holds at most `batch_size` rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub epoch_index: usize,
    pub batches: Vec<Vec<usize>>,
}

impl BatchPlan {
    fn from_indices(epoch_index: usize, indices: Vec<usize>, batch_size: usize) -> Self {
        Self {
            epoch_index,
            batches: indices.chunks(batch_size).map(<[usize]>::to_vec).collect(),
        }
    }

    pub fn total_indices(&self) -> usize {
        self.batches.iter().map(Vec::len).sum()
    }
}

/// Balanced weights `N / (C · count(c))` for each row, where `count` is the
/// class histogram of `row_classes` and `C` the number of classes present.
pub fn compute_sample_weights(labels: &LabelSpace, row_classes: &[usize]) -> Result<SampleWeights> {
    if row_classes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = vec![0usize; labels.len()];
    for &c in row_classes {
        *counts.get_mut(c).ok_or(Error::UnknownClassIndex {
            index: c,
            classes: labels.len(),
        })? += 1;
    }
    let n = row_classes.len() as f64;
    let present = counts.iter().filter(|&&k| k > 0).count() as f64;
    SampleWeights::new(
        row_classes
            .iter()
            .map(|&c| n / (present * counts[c] as f64))
            .collect(),
    )
}

/// `N` indices drawn i.i.d. with replacement, `P(i) ∝ weights[i]`, by
/// inverse-CDF lookup on the normalized cumulative weights.
pub fn draw_epoch(
    weights: &SampleWeights,
    batch_size: usize,
    seed: u64,
    epoch_index: usize,
) -> Result<BatchPlan> {
    check_batch_size(batch_size)?;
    let cdf = weights.cdf();
    let n = cdf.len();
    let mut rng = rng::stream(seed, &[domain::WEIGHTED_EPOCH, epoch_index as u64]);
    let indices = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            cdf.partition_point(|&c| c <= u).min(n - 1)
        })
        .collect();
    Ok(BatchPlan::from_indices(epoch_index, indices, batch_size))
}

/// A uniform shuffle of `0..n` without replacement, cut into batches.
pub fn draw_unweighted_epoch(
    n: usize,
    batch_size: usize,
    seed: u64,
    epoch_index: usize,
) -> Result<BatchPlan> {
    check_batch_size(batch_size)?;
    let mut rng = rng::stream(seed, &[domain::UNWEIGHTED_EPOCH, epoch_index as u64]);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    Ok(BatchPlan::from_indices(epoch_index, indices, batch_size))
}

fn check_batch_size(batch_size: usize) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
    }
    Ok(())
}
