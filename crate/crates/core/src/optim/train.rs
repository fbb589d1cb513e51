use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::gradnorm::{gradnorm_step, task_loss, GradNormState, MixedTargets, TaskLabels};
use crate::augment::mix_batch;
use crate::dataio::{Dataset, LabelSpace};
use crate::eval::{topk_accuracy, PredictionSet};
use crate::model::{
    backward_fusion, backward_linear, init_parameters, softmax_cross_entropy, Checkpoint,
    CheckpointMeta, Classifier, HeadShape, Inputs, Objective,
};
use crate::rng::{self, domain};
use crate::sampling::{compute_sample_weights, draw_epoch, draw_unweighted_epoch, BatchPlan};
use crate::{Error, Matrix, Result};

/// Training losses above this are treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Training and validation data with the category label space.
#[derive(Debug, Clone, Copy)]
pub struct TrainInputs<'a> {
    pub train: &'a Dataset,
    pub val: &'a Dataset,
    pub labels: &'a LabelSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_top5: f64,
    pub val_top1: f64,
    pub val_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_weights: Option<TaskWeights>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskWeights {
    pub category: Option<f64>,
    pub poisonous: Option<f64>,
    pub genus: Option<f64>,
    pub species: Option<f64>,
}

impl TaskWeights {
    fn from_state(s: &GradNormState) -> Self {
        Self {
            category: s.weight_of(Objective::Category),
            poisonous: s.weight_of(Objective::Poisonous),
            genus: s.weight_of(Objective::Genus),
            species: s.weight_of(Objective::Species),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

pub const TRAINLOG_HEADER: [&str; 8] = [
    "epoch",
    "train_loss",
    "val_top5",
    "w_category",
    "w_poisonous",
    "w_genus",
    "w_species",
    "seconds",
];

impl TrainLog {
    pub fn epochs(&self) -> usize {
        self.records.len()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(TRAINLOG_HEADER)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let tw = r.task_weights.unwrap_or(TaskWeights {
                category: None,
                poisonous: None,
                genus: None,
                species: None,
            });
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.val_top5.to_string(),
                opt(tw.category),
                opt(tw.poisonous),
                opt(tw.genus),
                opt(tw.species),
                r.seconds.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// The best-validation model and the full log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Classifier,
    pub log: TrainLog,
    pub best_epoch: usize,
    pub best_val_top5: f64,
    pub genus_labels: Option<LabelSpace>,
    pub species_labels: Option<LabelSpace>,
}

impl TrainOutcome {
    pub fn into_checkpoint(self, labels: &LabelSpace, config: &TrainConfig) -> Result<Checkpoint> {
        let mut meta = CheckpointMeta::new(self.model.shape(), labels.clone());
        meta.genus_labels = self.genus_labels;
        meta.species_labels = self.species_labels;
        meta.config = serde_json::to_value(config)?;
        meta.best_epoch = Some(self.best_epoch);
        meta.val_top5 = Some(self.best_val_top5);
        Ok(Checkpoint {
            meta,
            model: self.model,
        })
    }
}

/// Category scores for every row of `data`.
pub fn predict(model: &Classifier, data: &Dataset) -> Result<Matrix<f64>> {
    let text = data.text.as_ref().map(|t| t.features());
    if model.needs_text() && text.is_none() {
        return Err(Error::ShapeMismatch(
            "fusion head needs text embeddings".into(),
        ));
    }
    model.forward(Inputs {
        image: data.image.features(),
        text,
    })
}

/// Predictions over the rows whose category is in `labels`.
pub fn labeled_predictions(
    model: &Classifier,
    data: &Dataset,
    labels: &LabelSpace,
) -> Result<PredictionSet> {
    let (idx, truth): (Vec<usize>, Vec<usize>) = data
        .class_indices(labels)
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .unzip();
    if idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let subset = data.subset(&idx)?;
    let ids = subset
        .records
        .iter()
        .map(|r| r.observation_id.clone())
        .collect();
    PredictionSet::new(predict(model, &subset)?, Some(truth), ids)
}

/// Top-`k` accuracy over the labeled rows of `data`; `k` is capped at the
/// number of classes.
pub fn evaluate_checkpoint(
    model: &Classifier,
    data: &Dataset,
    labels: &LabelSpace,
    k: usize,
) -> Result<f64> {
    let preds = labeled_predictions(model, data, labels)?;
    topk_accuracy(&preds, k.min(preds.classes()))
}

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Labels of every training row for each enabled auxiliary objective.
struct AuxLabels {
    genus: Option<(LabelSpace, Vec<usize>)>,
    species: Option<(LabelSpace, Vec<usize>)>,
    poisonous: Option<Vec<bool>>,
}

fn aux_labels(train: &Dataset, objectives: &[Objective]) -> Result<AuxLabels> {
    let missing = |i: usize, objective: &'static str| Error::MissingObjectiveLabels {
        observation_id: train.records[i].observation_id.clone(),
        objective,
    };
    let classes = |objective: Objective,
                   get: fn(&crate::dataio::ObservationRecord) -> Option<&str>|
     -> Result<Option<(LabelSpace, Vec<usize>)>> {
        if !objectives.contains(&objective) {
            return Ok(None);
        }
        let values = train
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| get(r).ok_or_else(|| missing(i, objective.as_str())))
            .collect::<Result<Vec<_>>>()?;
        let space = LabelSpace::from_values(values.iter().copied())?;
        let idx = values
            .iter()
            .map(|v| space.index_of(v).expect("built from these values"))
            .collect();
        Ok(Some((space, idx)))
    };
    let poisonous = if objectives.contains(&Objective::Poisonous) {
        Some(
            train
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| r.poisonous.ok_or_else(|| missing(i, "poisonous")))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(AuxLabels {
        genus: classes(Objective::Genus, |r| r.genus.as_deref())?,
        species: classes(Objective::Species, |r| r.species.as_deref())?,
        poisonous,
    })
}

fn labeled_rows(data: &Dataset, labels: &LabelSpace) -> Result<(Dataset, Vec<usize>)> {
    let (idx, classes): (Vec<usize>, Vec<usize>) = data
        .class_indices(labels)
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .unzip();
    if idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((data.subset(&idx)?, classes))
}

/// The head implied by `config` and the data dimensions.
pub fn head_shape(inputs: &TrainInputs<'_>, config: &TrainConfig) -> Result<HeadShape> {
    let dim = inputs.train.image.dim();
    let classes = inputs.labels.len();
    if config.is_multi_task() {
        let aux = aux_labels(inputs.train, &config.objectives)?;
        Ok(HeadShape::Multi {
            dim,
            classes,
            genera: aux.genus.map_or(1, |g| g.0.len()),
            species: aux.species.map_or(1, |s| s.0.len()),
        })
    } else if config.use_text {
        let text = inputs
            .train
            .text
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("text fusion needs text embeddings".into()))?;
        Ok(HeadShape::Fusion {
            image_dim: dim,
            text_dim: text.dim(),
            classes,
        })
    } else {
        Ok(HeadShape::Linear { dim, classes })
    }
}

/// Trains a freshly initialized head.
pub fn train(inputs: &TrainInputs<'_>, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let shape = head_shape(inputs, config)?;
    train_from(init_parameters(shape, config.seed), inputs, config)
}

/// Trains `model` with early stopping and returns the best-validation
/// parameters. The monitor is validation top-5; ties are broken by top-1,
/// then by lower validation cross-entropy.
pub fn train_from(
    mut model: Classifier,
    inputs: &TrainInputs<'_>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if model.classes() != inputs.labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} classes, label space {}",
            model.classes(),
            inputs.labels.len()
        )));
    }
    let (train, classes) = labeled_rows(inputs.train, inputs.labels)?;
    let (val, _) = labeled_rows(inputs.val, inputs.labels)?;
    let weights = if config.weighted_sampling {
        Some(compute_sample_weights(inputs.labels, &classes)?)
    } else {
        None
    };
    let multi = matches!(model, Classifier::Multi(_));
    let aux = if multi {
        Some(aux_labels(&train, &config.objectives)?)
    } else {
        None
    };
    let mut gradnorm = multi
        .then(|| GradNormState::new(config.objectives.clone(), config.gradnorm_gamma, config.lr));
    let mut adam = AdamState::for_params(&model, config.lr);
    let k = 5.min(inputs.labels.len());

    let mut log = TrainLog::default();
    let mut best: Option<(usize, (f64, f64, f64), Classifier)> = None;
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        let clock = Stopwatch::start();
        let plan = match &weights {
            Some(w) => draw_epoch(w, config.batch_size, config.seed, epoch)?,
            None => draw_unweighted_epoch(train.len(), config.batch_size, config.seed, epoch)?,
        };
        let train_loss = run_epoch(
            &mut model,
            &train,
            &classes,
            aux.as_ref(),
            &plan,
            config,
            &mut adam,
            gradnorm.as_mut(),
        )?;
        let preds = labeled_predictions(&model, &val, inputs.labels)?;
        let val_top5 = topk_accuracy(&preds, k)?;
        let val_top1 = topk_accuracy(&preds, 1)?;
        let val_loss = softmax_cross_entropy(
            &preds.scores,
            preds.true_labels.as_deref().unwrap_or_default(),
        )?
        .0;
        log.records.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            val_top5,
            val_top1,
            val_loss,
            task_weights: gradnorm.as_ref().map(TaskWeights::from_state),
            seconds: clock.seconds(),
        });
        let score = (val_top5, val_top1, -val_loss);
        if best.as_ref().is_none_or(|b| score > b.1) {
            best = Some((epoch + 1, score, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stop_patience {
                break;
            }
        }
    }
    let (best_epoch, (best_val_top5, _, _), model) = best.expect("at least one epoch");
    let (genus_labels, species_labels) = match aux {
        Some(a) => (a.genus.map(|g| g.0), a.species.map(|s| s.0)),
        None => (None, None),
    };
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_val_top5,
        genus_labels,
        species_labels,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_epoch(
    model: &mut Classifier,
    train: &Dataset,
    classes: &[usize],
    aux: Option<&AuxLabels>,
    plan: &BatchPlan,
    config: &TrainConfig,
    adam: &mut AdamState,
    mut gradnorm: Option<&mut GradNormState>,
) -> Result<f64> {
    let mut total = 0.0;
    let mut rows = 0usize;
    for (b, batch) in plan.batches.iter().enumerate() {
        let features = train.image.features().select_rows(batch);
        let labels: Vec<usize> = batch.iter().map(|&i| classes[i]).collect();
        let mut r = rng::stream(
            config.seed,
            &[domain::MIXUP, plan.epoch_index as u64, b as u64],
        );
        let mixed = mix_batch(&features, &labels, &config.mixup, &mut r)?;
        let loss = match model {
            Classifier::Linear(head) => {
                let logits = crate::model::forward_linear(head, &mixed.mixed_features)?;
                let (loss, grad) = category_loss(&logits, &mixed)?;
                let grads = backward_linear(head, &mixed.mixed_features, &grad)?;
                adam_step(head, &grads, adam)?;
                loss
            }
            Classifier::Fusion(head) => {
                let text = train.text.as_ref().ok_or_else(|| {
                    Error::ShapeMismatch("fusion head needs text embeddings".into())
                })?;
                let text = mixed.mix_other(&text.features().select_rows(batch))?;
                let logits = crate::model::forward_fusion(head, &mixed.mixed_features, &text)?;
                let (loss, grad) = category_loss(&logits, &mixed)?;
                let grads = backward_fusion(head, &mixed.mixed_features, &text, &grad)?;
                adam_step(head, &grads, adam)?;
                loss
            }
            Classifier::Multi(head) => {
                let state = gradnorm
                    .as_deref_mut()
                    .expect("multi-task training keeps GradNorm state");
                let aux = aux.expect("multi-task training keeps auxiliary labels");
                let targets: Vec<MixedTargets> = state
                    .objectives
                    .iter()
                    .map(|&o| {
                        let l = match o {
                            Objective::Category => TaskLabels::Classes(labels.clone()),
                            Objective::Poisonous => {
                                let p = aux.poisonous.as_ref().expect("enabled objective");
                                TaskLabels::Binary(batch.iter().map(|&i| p[i]).collect())
                            }
                            Objective::Genus => {
                                let g = &aux.genus.as_ref().expect("enabled objective").1;
                                TaskLabels::Classes(batch.iter().map(|&i| g[i]).collect())
                            }
                            Objective::Species => {
                                let s = &aux.species.as_ref().expect("enabled objective").1;
                                TaskLabels::Classes(batch.iter().map(|&i| s[i]).collect())
                            }
                        };
                        MixedTargets {
                            lambda: mixed.lambda,
                            labels_j: l.permuted(&mixed.permutation),
                            labels_i: l,
                        }
                    })
                    .collect();
                let weights = state.task_weights.clone();
                let step = gradnorm_step(head, &mixed.mixed_features, &targets, state, adam)?;
                step.weighted_loss(&weights)
            }
        };
        if !loss.is_finite() || loss > DIVERGENCE_THRESHOLD {
            return Err(Error::DivergedLoss {
                epoch: plan.epoch_index + 1,
                batch: b,
                loss,
            });
        }
        total += loss * batch.len() as f64;
        rows += batch.len();
    }
    Ok(total / rows.max(1) as f64)
}

fn category_loss(
    logits: &Matrix<f64>,
    mixed: &crate::augment::MixupBatch,
) -> Result<(f64, Matrix<f64>)> {
    task_loss(
        logits,
        &MixedTargets {
            lambda: mixed.lambda,
            labels_i: TaskLabels::Classes(mixed.labels_i.clone()),
            labels_j: TaskLabels::Classes(mixed.labels_j.clone()),
        },
    )
}
