use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, ObservationRecord, Split};
use crate::rng::{self, domain};
use crate::{Error, Matrix, Result};

/// Parameters of a synthetic long-tail dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    /// Images of the most frequent class.
    pub head_count: usize,
    /// Images of the least frequent class.
    pub tail_count: usize,
    /// Per-coordinate standard deviation of the noise around each class mean.
    pub cluster_spread: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_owned()));
        if self.num_classes < 2 {
            return bad("num_classes must be at least 2");
        }
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if self.tail_count < 1 || self.head_count < self.tail_count {
            return bad("require head_count >= tail_count >= 1");
        }
        if !(self.cluster_spread >= 0.0 && self.cluster_spread.is_finite()) {
            return bad("cluster_spread must be finite and nonnegative");
        }
        Ok(())
    }

    /// Per-class image counts, geometric from `head_count` down to `tail_count`.
    pub fn class_counts(&self) -> Vec<usize> {
        let c = self.num_classes;
        let ratio = self.tail_count as f64 / self.head_count as f64;
        (0..c)
            .map(|k| {
                let t = k as f64 / (c - 1) as f64;
                let n = (self.head_count as f64 * ratio.powf(t)).round() as usize;
                n.clamp(self.tail_count, self.head_count)
            })
            .collect()
    }

    /// Raw category id of class `k`; zero-padded so lexicographic order
    /// equals class order.
    pub fn category_id(&self, k: usize) -> String {
        let width = (self.num_classes.saturating_sub(1))
            .to_string()
            .len()
            .max(4);
        format!("c{k:0width$}")
    }

    /// Class means: Gaussian directions rescaled to norm `sqrt(dim)`, so every
    /// mean sits on one sphere and is strictly closest to itself in angle.
    pub fn class_means(&self) -> Matrix<f32> {
        let mut rng = rng::stream(self.seed, &[domain::SYNTHETIC_MEANS]);
        let radius = (self.dim as f64).sqrt();
        let mut means = Matrix::zeros(self.num_classes, self.dim);
        for k in 0..self.num_classes {
            let v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            for (dst, x) in means.row_mut(k).iter_mut().zip(&v) {
                *dst = (x / norm * radius) as f32;
            }
        }
        means
    }

    fn taxonomy_of(&self, k: usize) -> (String, String, String) {
        let genus = k / 3;
        let family = genus / 3;
        (
            format!("Family{family:03}aceae"),
            format!("Genus{genus:04}"),
            format!("Genus{genus:04} species{k:05}"),
        )
    }

    fn record(&self, id: String, k: usize, split: Split) -> ObservationRecord {
        let (family, genus, species) = self.taxonomy_of(k);
        let mut r = ObservationRecord::new(id, Some(&self.category_id(k)), split)
            .with_taxonomy(&family, &genus, &species)
            .with_poisonous(k.is_multiple_of(5));
        r.location = Some(format!("plot-{}", k % 4));
        r.substrate = Some(["soil", "wood", "leaf litter"][k % 3].to_owned());
        r.season = Some(["spring", "summer", "autumn", "winter"][k % 4].to_owned());
        r
    }

    fn sample(
        &self,
        per_class: &[usize],
        split: Split,
        stream_tag: u64,
    ) -> Result<(EmbeddingTable, Vec<ObservationRecord>)> {
        self.validate()?;
        let means = self.class_means();
        let mut rng = rng::stream(
            self.seed,
            &[domain::SYNTHETIC_NOISE, split as u64, stream_tag],
        );
        let total: usize = per_class.iter().sum();
        let mut data = Vec::with_capacity(total * self.dim);
        let mut ids = Vec::with_capacity(total);
        let mut records = Vec::with_capacity(total);
        for (k, &n) in per_class.iter().enumerate() {
            for _ in 0..n {
                for &m in means.row(k) {
                    let noise: f64 = if self.cluster_spread > 0.0 {
                        self.cluster_spread * rng.sample::<f64, _>(StandardNormal)
                    } else {
                        0.0
                    };
                    data.push((f64::from(m) + noise) as f32);
                }
                let id = format!("syn-{}-{stream_tag}-{:06}", split, ids.len());
                records.push(self.record(id.clone(), k, split));
                ids.push(id);
            }
        }
        let table = EmbeddingTable::new(Matrix::from_vec(total, self.dim, data)?, ids)?;
        Ok((table, records))
    }
}

/// Long-tail training set: `class_counts()` images per class, split `train`.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
) -> Result<(EmbeddingTable, Vec<ObservationRecord>)> {
    spec.validate()?;
    spec.sample(&spec.class_counts(), Split::Train, 0)
}

/// Held-out rows drawn around the same class means as [`generate_synthetic`]
/// with an independent noise stream.
pub fn generate_holdout(
    spec: &SyntheticSpec,
    per_class: usize,
    split: Split,
    stream_tag: u64,
) -> Result<(EmbeddingTable, Vec<ObservationRecord>)> {
    spec.sample(&vec![per_class; spec.num_classes], split, stream_tag)
}
