use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ObservationRecord, Split};
use crate::{Error, Result};

/// Bijection between raw label strings and dense class indices.
///
/// Classes are sorted lexicographically by raw id, so indexing does not
/// depend on record order. Counts are per image (per training record).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "StoredLabels", into = "StoredLabels")]
pub struct LabelSpace {
    classes: Vec<String>,
    counts: Vec<usize>,
    index_of: BTreeMap<String, usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct StoredLabels {
    classes: Vec<String>,
    counts: Vec<usize>,
}

impl From<StoredLabels> for LabelSpace {
    fn from(s: StoredLabels) -> Self {
        LabelSpace::from_parts(s.classes, s.counts)
    }
}

impl From<LabelSpace> for StoredLabels {
    fn from(l: LabelSpace) -> Self {
        StoredLabels {
            classes: l.classes,
            counts: l.counts,
        }
    }
}

impl LabelSpace {
    /// Label space over arbitrary raw values (one occurrence each).
    pub fn from_values<'a>(values: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut tally: BTreeMap<String, usize> = BTreeMap::new();
        for v in values {
            *tally.entry(v.to_owned()).or_default() += 1;
        }
        if tally.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let (classes, counts): (Vec<_>, Vec<_>) = tally.into_iter().unzip();
        Ok(Self::from_parts(classes, counts))
    }

    /// Rebuilds a label space from stored classes and counts (checkpoint
    /// sidecars). Classes must be sorted and unique.
    pub fn from_parts(classes: Vec<String>, counts: Vec<usize>) -> Self {
        let index_of = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Self {
            classes,
            counts,
            index_of,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn index_of(&self, raw: &str) -> Option<usize> {
        self.index_of.get(raw).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Class universe from the training records' `category_id`s.
pub fn build_label_space(records: &[ObservationRecord]) -> Result<LabelSpace> {
    LabelSpace::from_values(
        records
            .iter()
            .filter(|r| r.split == Split::Train)
            .filter_map(|r| r.category_id.as_deref()),
    )
}
