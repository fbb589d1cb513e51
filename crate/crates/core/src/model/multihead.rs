use std::fmt;

use serde::{Deserialize, Serialize};

use super::linear::LinearHead;
use super::{check_finite, renamed, Gradients, Parameters, TensorView};
use crate::{Error, Matrix, Result};

/// Width of the shared trunk.
pub const TRUNK_WIDTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Category,
    Poisonous,
    Genus,
    Species,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::Category,
        Objective::Poisonous,
        Objective::Genus,
        Objective::Species,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Category => "category",
            Objective::Poisonous => "poisonous",
            Objective::Genus => "genus",
            Objective::Species => "species",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.as_str() == s.trim())
    }

    pub fn position(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A linear trunk shared by four objective heads.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHead {
    pub trunk: LinearHead,
    pub category: LinearHead,
    pub poisonous: LinearHead,
    pub genus: LinearHead,
    pub species: LinearHead,
}

/// Logits per objective; `poisonous` is a single column.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLogits {
    pub category: Matrix<f64>,
    pub poisonous: Matrix<f64>,
    pub genus: Matrix<f64>,
    pub species: Matrix<f64>,
}

impl MultiLogits {
    pub fn get(&self, objective: Objective) -> &Matrix<f64> {
        match objective {
            Objective::Category => &self.category,
            Objective::Poisonous => &self.poisonous,
            Objective::Genus => &self.genus,
            Objective::Species => &self.species,
        }
    }
}

/// Trunk output kept from the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCache {
    pub trunk_out: Matrix<f64>,
}

/// Gradient of one objective's loss: its own head plus the trunk.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGrad {
    pub objective: Objective,
    pub head_weight: Vec<f64>,
    pub head_bias: Vec<f64>,
    pub trunk_weight: Vec<f64>,
    pub trunk_bias: Vec<f64>,
}

impl TaskGrad {
    /// `‖∇_{W_shared} L‖₂` over the trunk weight matrix.
    pub fn trunk_weight_norm(&self) -> f64 {
        self.trunk_weight.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

impl MultiHead {
    pub fn zeros(dim: usize, classes: usize, genera: usize, species: usize) -> Self {
        Self {
            trunk: LinearHead::zeros(TRUNK_WIDTH, dim),
            category: LinearHead::zeros(classes, TRUNK_WIDTH),
            poisonous: LinearHead::zeros(1, TRUNK_WIDTH),
            genus: LinearHead::zeros(genera, TRUNK_WIDTH),
            species: LinearHead::zeros(species, TRUNK_WIDTH),
        }
    }

    pub fn dim(&self) -> usize {
        self.trunk.dim()
    }

    pub fn head(&self, objective: Objective) -> &LinearHead {
        match objective {
            Objective::Category => &self.category,
            Objective::Poisonous => &self.poisonous,
            Objective::Genus => &self.genus,
            Objective::Species => &self.species,
        }
    }

    pub fn forward_cached(&self, features: &Matrix<f32>) -> Result<(MultiLogits, MultiCache)> {
        let z = self.trunk.apply(features)?;
        let logits = MultiLogits {
            category: self.category.apply(&z)?,
            poisonous: self.poisonous.apply(&z)?,
            genus: self.genus.apply(&z)?,
            species: self.species.apply(&z)?,
        };
        for o in Objective::ALL {
            check_finite(logits.get(o), "multi-head logits")?;
        }
        Ok((logits, MultiCache { trunk_out: z }))
    }

    pub fn forward(&self, features: &Matrix<f32>) -> Result<MultiLogits> {
        Ok(self.forward_cached(features)?.0)
    }

    /// Backward pass of a single objective through its head and the trunk.
    pub fn task_backward(
        &self,
        features: &Matrix<f32>,
        cache: &MultiCache,
        objective: Objective,
        grad_logits: &Matrix<f64>,
    ) -> Result<TaskGrad> {
        let (head_weight, head_bias, gz) =
            self.head(objective)
                .grads(&cache.trunk_out, grad_logits, true)?;
        let gz = gz.expect("input gradient requested");
        let (trunk_weight, trunk_bias, _) = self.trunk.grads(features, &gz, false)?;
        Ok(TaskGrad {
            objective,
            head_weight,
            head_bias,
            trunk_weight,
            trunk_bias,
        })
    }

    /// Combines per-task gradients, scaling each by its weight, into the
    /// layout of [`Parameters::tensors`]. Heads without a task stay zero.
    pub fn combine(&self, tasks: &[(f64, TaskGrad)]) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        for (w, t) in tasks {
            if t.trunk_weight.len() != grads.0[0].len() {
                return Err(Error::ShapeMismatch(
                    "task gradient does not match trunk".into(),
                ));
            }
            let slot = 2 + 2 * t.objective.position();
            for (dst, src) in [
                (0, &t.trunk_weight),
                (1, &t.trunk_bias),
                (slot, &t.head_weight),
                (slot + 1, &t.head_bias),
            ] {
                for (d, s) in grads.0[dst].iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        Ok(grads)
    }
}

impl Parameters for MultiHead {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        let names = [
            ("trunk_weight", "trunk_bias"),
            ("category_weight", "category_bias"),
            ("poisonous_weight", "poisonous_bias"),
            ("genus_weight", "genus_bias"),
            ("species_weight", "species_bias"),
        ];
        [
            &self.trunk,
            &self.category,
            &self.poisonous,
            &self.genus,
            &self.species,
        ]
        .into_iter()
        .zip(names)
        .flat_map(|(h, (w, b))| renamed(h.tensors(), w, b))
        .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out = self.trunk.tensors_mut();
        out.extend(self.category.tensors_mut());
        out.extend(self.poisonous.tensors_mut());
        out.extend(self.genus.tensors_mut());
        out.extend(self.species.tensors_mut());
        out
    }
}
