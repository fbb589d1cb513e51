//! Adam, the training loop with early stopping, and GradNorm task balancing.

mod adam;
mod config;
mod gradnorm;
mod train;

pub use adam::{adam_step, AdamState};
pub use config::{Preset, TrainConfig};
pub use gradnorm::{
    gradnorm_step, task_loss, GradNormState, GradNormStep, MixedTargets, TaskLabels,
    MIN_TASK_WEIGHT,
};
pub use train::{
    evaluate_checkpoint, head_shape, labeled_predictions, predict, train, train_from, EpochRecord,
    TaskWeights, TrainInputs, TrainLog, TrainOutcome, DIVERGENCE_THRESHOLD, TRAINLOG_HEADER,
};
