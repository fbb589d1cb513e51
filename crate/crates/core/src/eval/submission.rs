use std::path::Path;

use super::metrics::{top_n, PredictionSet};
use crate::dataio::LabelSpace;
use crate::{Error, Result};

/// Writes `observation_id,rank1..rankN` with raw category ids in rank order.
pub fn emit_submission(
    preds: &PredictionSet,
    labels: &LabelSpace,
    n: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    if n == 0 || n > preds.classes() {
        return Err(Error::KOutOfRange {
            k: n,
            classes: preds.classes(),
        });
    }
    if labels.len() != preds.classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} score columns but {} labels",
            preds.classes(),
            labels.len()
        )));
    }
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["observation_id".to_string()];
    header.extend((1..=n).map(|r| format!("rank{r}")));
    w.write_record(&header)?;
    for (i, id) in preds.row_ids.iter().enumerate() {
        let mut rec = vec![id.as_str()];
        rec.extend(
            top_n(preds.scores.row(i), n)
                .into_iter()
                .map(|c| labels.name(c)),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows of a submission file: observation id and ranked category ids.
pub fn read_submission(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<String>)>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers()?.clone();
    if header.get(0) != Some("observation_id") {
        return Err(Error::SchemaViolation {
            line: 1,
            message: "first column must be observation_id".into(),
        });
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let mut it = rec.iter().map(str::to_string);
            let id = it.next().unwrap_or_default();
            Ok((id, it.collect()))
        })
        .collect()
}
