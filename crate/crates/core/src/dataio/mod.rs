//! On-disk formats, label spaces, taxonomy and synthetic data.

mod emb1;
mod ingest;
mod labels;
mod metadata;
mod synthetic;
mod taxonomy;

pub use emb1::{read_embedding_table, write_embedding_table, EmbeddingTable, MAGIC};
pub use ingest::{embeddings_from_csv, metadata_from_csv};
pub use labels::{build_label_space, LabelSpace};
pub use metadata::{parse_record, read_metadata, write_metadata, ObservationRecord, Split};
pub use synthetic::{generate_holdout, generate_synthetic, SyntheticSpec};
pub use taxonomy::{build_taxonomy, TaxonomyTree};

use crate::{Error, Result};

/// Image embeddings, optional text embeddings and metadata for one split,
/// aligned by row position.
///
/// Row ids identify images; `observation_id` groups images of one
/// observation and may repeat.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub image: EmbeddingTable,
    pub text: Option<EmbeddingTable>,
    pub records: Vec<ObservationRecord>,
}

impl Dataset {
    pub fn new(
        image: EmbeddingTable,
        text: Option<EmbeddingTable>,
        records: Vec<ObservationRecord>,
    ) -> Result<Self> {
        if image.len() != records.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} embedding rows but {} metadata records",
                image.len(),
                records.len()
            )));
        }
        if let Some(t) = &text {
            if t.len() != image.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} text rows but {} image rows",
                    t.len(),
                    image.len()
                )));
            }
        }
        Ok(Self {
            image,
            text,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Rows belonging to `split`, in file order.
    pub fn split(&self, split: Split) -> Result<Self> {
        let idx: Vec<usize> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split)
            .map(|(i, _)| i)
            .collect();
        self.subset(&idx)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            image: self.image.subset(indices)?,
            text: self.text.as_ref().map(|t| t.subset(indices)).transpose()?,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        })
    }

    /// Class index of each row; `None` for rows without a category or with a
    /// category outside `labels`.
    pub fn class_indices(&self, labels: &LabelSpace) -> Vec<Option<usize>> {
        self.records
            .iter()
            .map(|r| r.category_id.as_deref().and_then(|c| labels.index_of(c)))
            .collect()
    }

    /// Concatenation of two datasets (e.g. train + val files).
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        let join = |a: &EmbeddingTable, b: &EmbeddingTable| -> Result<EmbeddingTable> {
            if a.dim() != b.dim() {
                return Err(Error::DimMismatch {
                    context: "concatenating tables".into(),
                    expected: a.dim(),
                    found: b.dim(),
                });
            }
            let mut data = a.features().as_slice().to_vec();
            data.extend_from_slice(b.features().as_slice());
            let mut ids = a.row_ids().to_vec();
            ids.extend_from_slice(b.row_ids());
            EmbeddingTable::new(
                crate::Matrix::from_vec(a.len() + b.len(), a.dim(), data)?,
                ids,
            )
        };
        let text = match (&self.text, &other.text) {
            (Some(a), Some(b)) => Some(join(a, b)?),
            (None, None) => None,
            _ => {
                return Err(Error::ShapeMismatch(
                    "cannot concatenate datasets with and without text embeddings".into(),
                ))
            }
        };
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Dataset::new(join(&self.image, &other.image)?, text, records)
    }
}
