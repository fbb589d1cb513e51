use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use crate::model::{binary_cross_entropy, softmax_cross_entropy, MultiHead, Objective};
use crate::{Error, Matrix, Result};

/// Lower bound applied to every task weight before renormalization.
pub const MIN_TASK_WEIGHT: f64 = 1e-4;

/// Targets of one objective over a batch.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskLabels {
    Classes(Vec<usize>),
    Binary(Vec<bool>),
}

impl TaskLabels {
    pub fn len(&self) -> usize {
        match self {
            TaskLabels::Classes(v) => v.len(),
            TaskLabels::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The labels reordered by `permutation`.
    pub fn permuted(&self, permutation: &[usize]) -> Self {
        match self {
            TaskLabels::Classes(v) => {
                TaskLabels::Classes(permutation.iter().map(|&p| v[p]).collect())
            }
            TaskLabels::Binary(v) => {
                TaskLabels::Binary(permutation.iter().map(|&p| v[p]).collect())
            }
        }
    }
}

/// A batch's targets for one objective under a mixup coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedTargets {
    pub lambda: f64,
    pub labels_i: TaskLabels,
    pub labels_j: TaskLabels,
}

impl MixedTargets {
    pub fn plain(labels: TaskLabels) -> Self {
        Self {
            lambda: 1.0,
            labels_j: labels.clone(),
            labels_i: labels,
        }
    }
}

fn single_loss(logits: &Matrix<f64>, labels: &TaskLabels) -> Result<(f64, Matrix<f64>)> {
    match labels {
        TaskLabels::Classes(t) => softmax_cross_entropy(logits, t),
        TaskLabels::Binary(t) => {
            if logits.cols() != 1 {
                return Err(Error::ShapeMismatch(
                    "binary objective needs one logit column".into(),
                ));
            }
            let (l, g) = binary_cross_entropy(logits.as_slice(), t)?;
            Ok((l, Matrix::from_vec(g.len(), 1, g)?))
        }
    }
}

/// `λ·L(y_i) + (1−λ)·L(y_j)` and its gradient with respect to the logits.
pub fn task_loss(logits: &Matrix<f64>, targets: &MixedTargets) -> Result<(f64, Matrix<f64>)> {
    let (li, mut gi) = single_loss(logits, &targets.labels_i)?;
    if targets.lambda == 1.0 {
        return Ok((li, gi));
    }
    let (lj, gj) = single_loss(logits, &targets.labels_j)?;
    gi.scale(targets.lambda);
    gi.add_scaled(&gj, 1.0 - targets.lambda);
    Ok((targets.lambda * li + (1.0 - targets.lambda) * lj, gi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradNormState {
    pub objectives: Vec<Objective>,
    pub task_weights: Vec<f64>,
    pub initial_losses: Option<Vec<f64>>,
    pub gamma: f64,
    pub weight_optimizer: AdamState,
}

impl GradNormState {
    /// Unit weights, so they already sum to the number of objectives.
    pub fn new(objectives: Vec<Objective>, gamma: f64, lr: f64) -> Self {
        let t = objectives.len();
        Self {
            objectives,
            task_weights: vec![1.0; t],
            initial_losses: None,
            gamma,
            weight_optimizer: AdamState::with_sizes(&[t], lr),
        }
    }

    /// Task weights keyed by objective, `None` for objectives not trained.
    pub fn weight_of(&self, objective: Objective) -> Option<f64> {
        self.objectives
            .iter()
            .position(|&o| o == objective)
            .map(|i| self.task_weights[i])
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GradNormStep {
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub targets: Vec<f64>,
}

impl GradNormStep {
    /// `Σ_k w_k·L_k` with the weights used for this step.
    pub fn weighted_loss(&self, weights: &[f64]) -> f64 {
        self.losses.iter().zip(weights).map(|(l, w)| l * w).sum()
    }
}

/// One GradNorm step: the model descends `Σ_k w_k·L_k`; the task weights
/// take an Adam step on `Σ_k |G_k − Ḡ·r_k^γ|`, then are clamped to at least
/// [`MIN_TASK_WEIGHT`] and rescaled to sum to the number of objectives.
pub fn gradnorm_step(
    model: &mut MultiHead,
    features: &Matrix<f32>,
    targets: &[MixedTargets],
    state: &mut GradNormState,
    adam: &mut AdamState,
) -> Result<GradNormStep> {
    let t = state.objectives.len();
    if targets.len() != t {
        return Err(Error::ShapeMismatch(format!(
            "{t} objectives but {} target sets",
            targets.len()
        )));
    }
    let (logits, cache) = model.forward_cached(features)?;
    let mut losses = Vec::with_capacity(t);
    let mut tasks = Vec::with_capacity(t);
    let mut raw_norms = Vec::with_capacity(t);
    for (&obj, tg) in state.objectives.iter().zip(targets) {
        let (loss, grad) = task_loss(logits.get(obj), tg)?;
        let task = model.task_backward(features, &cache, obj, &grad)?;
        raw_norms.push(task.trunk_weight_norm());
        losses.push(loss);
        tasks.push(task);
    }
    let initial = state
        .initial_losses
        .get_or_insert_with(|| losses.clone())
        .clone();

    let w = &state.task_weights;
    let grad_norms: Vec<f64> = raw_norms.iter().zip(w).map(|(n, w)| w * n).collect();
    let ratios: Vec<f64> = losses
        .iter()
        .zip(&initial)
        .map(|(&l, &l0)| if l0 > 0.0 { l / l0 } else { 1.0 })
        .collect();
    let mean_ratio = ratios.iter().sum::<f64>() / t as f64;
    let mean_norm = grad_norms.iter().sum::<f64>() / t as f64;
    let norm_targets: Vec<f64> = ratios
        .iter()
        .map(|r| {
            let rel = if mean_ratio > 0.0 {
                r / mean_ratio
            } else {
                1.0
            };
            mean_norm * rel.powf(state.gamma)
        })
        .collect();
    // d|G_k − target_k| / dw_k with the target held constant.
    let weight_grads: Vec<f64> = grad_norms
        .iter()
        .zip(&norm_targets)
        .zip(&raw_norms)
        .map(|((g, target), raw)| sign(g - target) * raw)
        .collect();

    let weighted: Vec<(f64, _)> = w.iter().copied().zip(tasks).collect();
    let grads = model.combine(&weighted)?;
    adam_step(model, &grads, adam)?;

    state
        .weight_optimizer
        .step_vector(&mut state.task_weights, &weight_grads)?;
    for x in &mut state.task_weights {
        *x = x.max(MIN_TASK_WEIGHT);
    }
    let sum: f64 = state.task_weights.iter().sum();
    for x in &mut state.task_weights {
        *x *= t as f64 / sum;
    }
    Ok(GradNormStep {
        losses,
        grad_norms,
        targets: norm_targets,
    })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
