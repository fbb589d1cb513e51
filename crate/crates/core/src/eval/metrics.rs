use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataio::LabelSpace;
use crate::{Error, Matrix, Result};

/// Scores for a batch of rows, with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub scores: Matrix<f64>,
    pub true_labels: Option<Vec<usize>>,
    pub row_ids: Vec<String>,
}

impl PredictionSet {
    pub fn new(
        scores: Matrix<f64>,
        true_labels: Option<Vec<usize>>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        if row_ids.len() != scores.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} score rows but {} row ids",
                scores.rows(),
                row_ids.len()
            )));
        }
        if let Some(t) = &true_labels {
            if t.len() != scores.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "{} score rows but {} labels",
                    scores.rows(),
                    t.len()
                )));
            }
            if let Some(&bad) = t.iter().find(|&&c| c >= scores.cols()) {
                return Err(Error::IndexOutOfRange {
                    target: bad,
                    classes: scores.cols(),
                });
            }
        }
        if !scores.is_finite() {
            return Err(Error::NonFiniteOutput("prediction scores"));
        }
        Ok(Self {
            scores,
            true_labels,
            row_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.rows() == 0
    }

    pub fn classes(&self) -> usize {
        self.scores.cols()
    }

    fn labels(&self) -> Result<&[usize]> {
        self.true_labels.as_deref().ok_or(Error::MissingLabels)
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.classes() {
            return Err(Error::KOutOfRange {
                k,
                classes: self.classes(),
            });
        }
        Ok(())
    }
}

/// Ranking order: higher score first, lower class index on ties.
fn rank_cmp(row: &[f64], a: usize, b: usize) -> Ordering {
    row[b].total_cmp(&row[a]).then(a.cmp(&b))
}

/// True iff `target` is among the `k` best classes of `row`.
pub fn in_top_k(row: &[f64], target: usize, k: usize) -> bool {
    let s = row[target];
    let beaten_by = row
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > s || (v == s && j < target))
        .count();
    beaten_by < k
}

/// Indices of the `n` best classes, rank-ordered.
pub fn top_n(row: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    let n = n.min(row.len());
    if n < row.len() {
        idx.select_nth_unstable_by(n, |&a, &b| rank_cmp(row, a, b));
        idx.truncate(n);
    }
    idx.sort_by(|&a, &b| rank_cmp(row, a, b));
    idx
}

/// Fraction of rows whose label is among the `k` highest scores.
pub fn topk_accuracy(preds: &PredictionSet, k: usize) -> Result<f64> {
    let labels = preds.labels()?;
    preds.check_k(k)?;
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &t)| in_top_k(preds.scores.row(i), t, k))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class_index: usize,
    pub class_id: String,
    pub frequency: usize,
    pub topk_acc: f64,
}

/// Top-k accuracy restricted to each class present in the labels, in class
/// index order.
pub fn per_class_topk(
    preds: &PredictionSet,
    k: usize,
    labels: &LabelSpace,
) -> Result<Vec<ClassAccuracy>> {
    let truth = preds.labels()?;
    preds.check_k(k)?;
    if labels.len() != preds.classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} score columns but {} labels",
            preds.classes(),
            labels.len()
        )));
    }
    let mut counts = vec![0usize; labels.len()];
    let mut hits = vec![0usize; labels.len()];
    for (i, &t) in truth.iter().enumerate() {
        counts[t] += 1;
        if in_top_k(preds.scores.row(i), t, k) {
            hits[t] += 1;
        }
    }
    Ok(counts
        .iter()
        .zip(&hits)
        .enumerate()
        .filter(|(_, (&n, _))| n > 0)
        .map(|(c, (&n, &h))| ClassAccuracy {
            class_index: c,
            class_id: labels.name(c).to_string(),
            frequency: n,
            topk_acc: h as f64 / n as f64,
        })
        .collect())
}
