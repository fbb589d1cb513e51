//! Top-k metrics, submissions, reports and experiment runners.
mod experiments;
mod metrics;
mod report;
mod submission;

pub use experiments::{
    config_digest, default_alpha_grid, parse_alpha_grid, run_ablation, sweep_alpha, AblationResult,
    AlphaPoint, DataBundle,
};
pub use metrics::{in_top_k, per_class_topk, top_n, topk_accuracy, ClassAccuracy, PredictionSet};
pub use report::{
    read_ablation_csv, reference_for, write_ablation_csv, write_alpha_sweep_csv,
    write_class_freq_csv, write_reference_report, AblationRow, ReferenceScore, ABLATION_HEADER,
    ALPHA_SWEEP_HEADER, CLASS_FREQ_HEADER, REFERENCE_HEADER, REFERENCE_SCORES,
};
pub use submission::{emit_submission, read_submission};
