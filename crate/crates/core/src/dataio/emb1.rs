//! The `EMB1` embedding container.
//!
//! Layout (no padding, all integers and floats little-endian):
//!
//! ```text
//! "EMB1"                      4 ASCII bytes
//! row_count                   u32
//! dim                         u32
//! row_count × id              UTF-8, each terminated by a single 0x00
//! row_count × dim × value     IEEE-754 binary32, row-major
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::{Error, Matrix, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";

/// Per-observation feature vectors with their identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    features: Matrix<f32>,
    row_ids: Vec<String>,
}

impl EmbeddingTable {
    /// Builds a table, checking every invariant: ids unique, non-empty and
    /// NUL-free; one id per row; every value finite.
    pub fn new(features: Matrix<f32>, row_ids: Vec<String>) -> Result<Self> {
        if features.rows() != row_ids.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows but {} row ids",
                features.rows(),
                row_ids.len()
            )));
        }
        if features.cols() == 0 {
            return Err(Error::ShapeMismatch(
                "embedding dim must be positive".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(row_ids.len());
        for id in &row_ids {
            if id.is_empty() || id.contains('\0') {
                return Err(Error::InvalidRowId(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateRowId(id.clone()));
            }
        }
        for (r, row) in features.iter_rows().enumerate() {
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { row: r, col: c });
            }
        }
        Ok(Self { features, row_ids })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn features(&self) -> &Matrix<f32> {
        &self.features
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.features.row(i)
    }

    /// Sub-table with the given rows, in order. Indices must be distinct.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let ids = indices.iter().map(|&i| self.row_ids[i].clone()).collect();
        Self::new(self.features.select_rows(indices), ids)
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.row_ids == other.row_ids
            && self.features.shape() == other.features.shape()
            && self
                .features
                .as_slice()
                .iter()
                .zip(other.features.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let ids_len: usize = self.row_ids.iter().map(|s| s.len() + 1).sum();
        let mut out = Vec::with_capacity(12 + ids_len + 4 * self.features.as_slice().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for id in &self.row_ids {
            out.extend_from_slice(id.as_bytes());
            out.push(0);
        }
        for v in self.features.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a container. `origin` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::MagicMismatch {
                path: origin.to_path_buf(),
            });
        }
        if bytes.len() < 12 {
            return Err(Error::Truncated("header shorter than 12 bytes".into()));
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut pos = 12;
        let mut ids = Vec::with_capacity(rows.min(1 << 20));
        for i in 0..rows {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == 0)
                .ok_or_else(|| Error::Truncated(format!("row id {i} is not NUL-terminated")))?;
            let id = std::str::from_utf8(&bytes[pos..pos + end])
                .map_err(|_| Error::InvalidRowId(format!("row {i}: invalid UTF-8")))?;
            ids.push(id.to_owned());
            pos += end + 1;
        }
        let payload = &bytes[pos..];
        let expected = rows * dim * 4;
        if payload.len() != expected {
            // A short or long payload means some row does not hold exactly `dim` values.
            let found = payload.len() / 4 / rows.max(1);
            return Err(Error::DimMismatch {
                context: format!(
                    "{}: payload is {} bytes, header implies {rows} rows x {dim}",
                    origin.display(),
                    payload.len()
                ),
                expected: dim,
                found,
            });
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(Matrix::from_vec(rows, dim, values)?, ids)
    }
}

pub fn write_embedding_table(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, table.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::from_bytes(&bytes, path)
}
