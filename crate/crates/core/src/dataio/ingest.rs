//! CSV → EMB1 / line-JSON conversion.

use std::path::Path;

use super::{EmbeddingTable, ObservationRecord};
use crate::{Error, Matrix, Result};

/// Reads a CSV whose first column is the row id and whose remaining columns
/// are feature values. A first line whose second field is not a number is
/// treated as a header.
pub fn embeddings_from_csv(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut dim: Option<usize> = None;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if i == 0 && rec.get(1).is_some_and(|f| f.trim().parse::<f32>().is_err()) {
            continue;
        }
        let n = rec.len().saturating_sub(1);
        match dim {
            None => dim = Some(n),
            Some(d) if d != n => {
                return Err(Error::DimMismatch {
                    context: format!("{} line {line}", path.display()),
                    expected: d,
                    found: n,
                })
            }
            _ => {}
        }
        ids.push(rec.get(0).unwrap_or_default().to_owned());
        for (col, field) in rec.iter().skip(1).enumerate() {
            let v: f32 = field.trim().parse().map_err(|_| Error::SchemaViolation {
                line,
                message: format!("column {}: {field:?} is not a number", col + 2),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: ids.len() - 1,
                    col,
                });
            }
            data.push(v);
        }
    }
    let dim = dim.ok_or_else(|| Error::SchemaViolation {
        line: 0,
        message: "no embedding rows".into(),
    })?;
    EmbeddingTable::new(Matrix::from_vec(ids.len(), dim, data)?, ids)
}

/// Reads a metadata CSV with a header naming (at least) `observation_id` and
/// `split`; recognised optional columns are `category_id`, `species`,
/// `genus`, `family`, `poisonous`, `location`, `substrate`, `season` and
/// `image_path`. Empty cells become nulls.
pub fn metadata_from_csv(path: impl AsRef<Path>) -> Result<Vec<ObservationRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = col("observation_id").ok_or_else(|| Error::SchemaViolation {
        line: 1,
        message: "missing observation_id column".into(),
    })?;
    let split_col = col("split").ok_or_else(|| Error::SchemaViolation {
        line: 1,
        message: "missing split column".into(),
    })?;
    let optional: Vec<(&str, Option<usize>)> = [
        "category_id",
        "species",
        "genus",
        "family",
        "poisonous",
        "location",
        "substrate",
        "season",
        "image_path",
    ]
    .into_iter()
    .map(|n| (n, col(n)))
    .collect();

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let cell = |c: Option<usize>| {
            c.and_then(|c| rec.get(c))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
        };
        let mut obj = serde_json::Map::new();
        obj.insert(
            "observation_id".into(),
            cell(Some(id_col)).unwrap_or_default().into(),
        );
        obj.insert(
            "split".into(),
            cell(Some(split_col)).unwrap_or_default().into(),
        );
        for (name, c) in &optional {
            let v = match (cell(*c), *name) {
                (None, _) => serde_json::Value::Null,
                (Some(s), "poisonous") => match s.to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" => true.into(),
                    "false" | "0" | "no" => false.into(),
                    _ => {
                        return Err(Error::SchemaViolation {
                            line,
                            message: format!("poisonous value {s:?} is not a boolean"),
                        })
                    }
                },
                (Some(s), _) => s.into(),
            };
            obj.insert((*name).into(), v);
        }
        let text = serde_json::Value::Object(obj).to_string();
        out.push(super::parse_record(&text, line)?);
    }
    Ok(out)
}
