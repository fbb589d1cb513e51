use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{LabelSpace, ObservationRecord, Split};
use crate::{Error, Result};

/// family → genus → species hierarchy of the training set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyTree {
    families: BTreeSet<String>,
    genera_of: BTreeMap<String, BTreeSet<String>>,
    species_of: BTreeMap<String, BTreeSet<String>>,
    class_of_species: BTreeMap<String, usize>,
    /// Training images per species.
    species_frequency: BTreeMap<String, usize>,
}

impl TaxonomyTree {
    pub fn families(&self) -> impl Iterator<Item = &str> + '_ {
        self.families.iter().map(String::as_str)
    }

    pub fn genera_of(&self, family: &str) -> impl Iterator<Item = &str> + '_ {
        self.genera_of
            .get(family)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    pub fn species_of(&self, genus: &str) -> impl Iterator<Item = &str> + '_ {
        self.species_of
            .get(genus)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    pub fn class_of_species(&self, species: &str) -> Option<usize> {
        self.class_of_species.get(species).copied()
    }

    pub fn contains_species(&self, species: &str) -> bool {
        self.class_of_species.contains_key(species)
    }

    pub fn contains_genus(&self, genus: &str) -> bool {
        self.species_of.contains_key(genus)
    }

    pub fn species_frequency(&self, species: &str) -> usize {
        self.species_frequency.get(species).copied().unwrap_or(0)
    }

    pub fn family_count(&self) -> usize {
        self.families.len()
    }

    pub fn genus_count(&self) -> usize {
        self.species_of.len()
    }

    pub fn species_count(&self) -> usize {
        self.class_of_species.len()
    }

    pub fn all_species(&self) -> impl Iterator<Item = &str> + '_ {
        self.class_of_species.keys().map(String::as_str)
    }

    /// Sorted, deduplicated union of the genera under `families`.
    pub fn genera_under<'a>(&self, families: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let set: BTreeSet<&str> = families
            .into_iter()
            .flat_map(|f| self.genera_of(f))
            .collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Sorted, deduplicated union of the species under `genera`.
    pub fn species_under<'a>(&self, genera: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let set: BTreeSet<&str> = genera
            .into_iter()
            .flat_map(|g| self.species_of(g))
            .collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Species ordered by training frequency (descending), ties by name.
    pub fn species_by_frequency(&self) -> Vec<String> {
        let mut all: Vec<(&String, usize)> = self
            .species_frequency
            .iter()
            .map(|(s, &n)| (s, n))
            .collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        all.into_iter().map(|(s, _)| s.clone()).collect()
    }
}

/// Builds the taxonomy of the training records.
///
/// A species maps to the category it is most often labelled with in
/// training (ties resolved to the lower class index).
pub fn build_taxonomy(records: &[ObservationRecord], labels: &LabelSpace) -> Result<TaxonomyTree> {
    let mut family_of_genus: BTreeMap<String, String> = BTreeMap::new();
    let mut genus_of_species: BTreeMap<String, String> = BTreeMap::new();
    let mut category_votes: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut species_frequency: BTreeMap<String, usize> = BTreeMap::new();

    for r in records.iter().filter(|r| r.split == Split::Train) {
        let (Some(family), Some(genus), Some(species)) = (
            r.family.as_deref(),
            r.genus.as_deref(),
            r.species.as_deref(),
        ) else {
            return Err(Error::IncompleteTaxonomy(r.observation_id.clone()));
        };
        if let Some(prev) = genus_of_species.get(species) {
            if prev != genus {
                return Err(Error::InconsistentTaxonomy(format!(
                    "species {species:?} appears under genera {prev:?} and {genus:?}"
                )));
            }
        } else {
            genus_of_species.insert(species.to_owned(), genus.to_owned());
        }
        if let Some(prev) = family_of_genus.get(genus) {
            if prev != family {
                return Err(Error::InconsistentTaxonomy(format!(
                    "genus {genus:?} appears under families {prev:?} and {family:?}"
                )));
            }
        } else {
            family_of_genus.insert(genus.to_owned(), family.to_owned());
        }
        *species_frequency.entry(species.to_owned()).or_default() += 1;
        if let Some(class) = r.category_id.as_deref().and_then(|c| labels.index_of(c)) {
            *category_votes
                .entry(species.to_owned())
                .or_default()
                .entry(class)
                .or_default() += 1;
        }
    }
    if genus_of_species.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }

    let mut families = BTreeSet::new();
    let mut genera_of: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut species_of: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (genus, family) in &family_of_genus {
        families.insert(family.clone());
        genera_of
            .entry(family.clone())
            .or_default()
            .insert(genus.clone());
    }
    for (species, genus) in &genus_of_species {
        species_of
            .entry(genus.clone())
            .or_default()
            .insert(species.clone());
    }
    let mut class_of_species = BTreeMap::new();
    for species in genus_of_species.keys() {
        let class = category_votes
            .get(species)
            .and_then(|votes| {
                // max by count, then by lower index
                votes
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                    .map(|(&c, _)| c)
            })
            .ok_or_else(|| {
                Error::InconsistentTaxonomy(format!("species {species:?} has no labelled category"))
            })?;
        class_of_species.insert(species.clone(), class);
    }

    Ok(TaxonomyTree {
        families,
        genera_of,
        species_of,
        class_of_species,
        species_frequency,
    })
}
