use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiments::{AblationResult, AlphaPoint};
use super::metrics::ClassAccuracy;
use crate::{Error, Result};

/// A published leaderboard score pair for one ablation row, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceScore {
    pub row: &'static str,
    /// The preset reproducing this row, if there is one.
    pub preset: Option<&'static str>,
    pub public: f64,
    pub private: f64,
}

const fn reference(
    row: &'static str,
    preset: Option<&'static str>,
    public: f64,
    private: f64,
) -> ReferenceScore {
    ReferenceScore {
        row,
        preset,
        public,
        private,
    }
}

pub const REFERENCE_SCORES: [ReferenceScore; 12] = [
    reference("baseline", Some("baseline"), 48.672, 43.078),
    reference("weighted sampling", Some("weighted"), 50.442, 44.372),
    reference(
        "mixup alpha=2.0 (competition)",
        Some("competition-mixup"),
        46.460,
        40.750,
    ),
    reference("mixup alpha=1.20", Some("mixup"), 52.654, 44.760),
    reference("mixup alpha=1.45", Some("post-comp"), 52.654, 47.347),
    reference(
        "mixup alpha=2.0 + weighted (competition)",
        Some("competition-mixup-weighted"),
        49.557,
        45.407,
    ),
    reference(
        "mixup alpha=1.20 + weighted",
        Some("mixup-weighted"),
        50.884,
        46.830,
    ),
    reference("mixup alpha=1.45 + weighted", None, 53.982, 46.054),
    reference("text fusion (ModernBERT)", Some("fusion"), 46.460, 38.421),
    reference("text fusion (BioBERT)", None, 45.132, 40.620),
    reference("gradnorm + weighted", Some("gradnorm"), 42.920, 39.197),
    reference("text fusion + gradnorm + weighted", None, 39.823, 36.093),
];

/// The reference row reproduced by a preset.
pub fn reference_for(preset: &str) -> Option<&'static ReferenceScore> {
    REFERENCE_SCORES.iter().find(|r| r.preset == Some(preset))
}

fn write_rows<R: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = R>,
    header: &[&str],
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const ABLATION_HEADER: [&str; 6] = [
    "run",
    "alpha",
    "weighted",
    "objectives",
    "val_top5",
    "test_top5",
];
pub const ALPHA_SWEEP_HEADER: [&str; 3] = ["alpha", "val_top1", "val_top5"];
pub const CLASS_FREQ_HEADER: [&str; 3] = ["class_id", "frequency", "top5_acc"];
pub const REFERENCE_HEADER: [&str; 6] = [
    "run",
    "local_val_top5",
    "local_test_top5",
    "reference_row",
    "reference_public",
    "reference_private",
];

/// One line of `ablation.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub run: String,
    pub alpha: Option<f64>,
    pub weighted: bool,
    pub objectives: String,
    pub val_top5: f64,
    pub test_top5: Option<f64>,
}

impl From<&AblationResult> for AblationRow {
    fn from(r: &AblationResult) -> Self {
        Self {
            run: r.run.clone(),
            alpha: r.alpha,
            weighted: r.weighted,
            objectives: r.objectives.clone(),
            val_top5: r.val_top5,
            test_top5: r.test_top5,
        }
    }
}

pub fn write_ablation_csv(rows: &[AblationRow], path: impl AsRef<Path>) -> Result<()> {
    write_rows(path.as_ref(), rows, &ABLATION_HEADER)
}

pub fn read_ablation_csv(path: impl AsRef<Path>) -> Result<Vec<AblationRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?;
    if header.iter().ne(ABLATION_HEADER) {
        return Err(Error::SchemaViolation {
            line: 1,
            message: format!("expected header {}", ABLATION_HEADER.join(",")),
        });
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}

/// Local scores next to the published ones. Local values are fractions in
/// `[0,1]` on synthetic or local data; reference values are leaderboard
/// percentages and are not expected to match.
pub fn write_reference_report(results: &[AblationRow], path: impl AsRef<Path>) -> Result<()> {
    let rows = results.iter().map(|r| {
        let reference = reference_for(&r.run);
        (
            &r.run,
            r.val_top5,
            r.test_top5,
            reference.map(|x| x.row),
            reference.map(|x| x.public),
            reference.map(|x| x.private),
        )
    });
    write_rows(path.as_ref(), rows, &REFERENCE_HEADER)
}

pub fn write_alpha_sweep_csv(points: &[AlphaPoint], path: impl AsRef<Path>) -> Result<()> {
    let rows = points.iter().map(|p| (p.alpha, p.val_top1, p.val_top5));
    write_rows(path.as_ref(), rows, &ALPHA_SWEEP_HEADER)
}

pub fn write_class_freq_csv(classes: &[ClassAccuracy], path: impl AsRef<Path>) -> Result<()> {
    let rows = classes
        .iter()
        .map(|c| (&c.class_id, c.frequency, c.topk_acc));
    write_rows(path.as_ref(), rows, &CLASS_FREQ_HEADER)
}
