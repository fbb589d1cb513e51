//! Classifier heads over frozen embeddings.
//!
//! Parameters are `f32`; forward activations, losses and gradients are
//! accumulated in `f64`. Every head exposes its tensors in a fixed order via
//! [`Parameters`], and its backward pass returns [`Gradients`] in that same
//! order, which is what the optimizer and the checkpoint writer consume.

mod checkpoint;
mod fusion;
mod init;
mod linear;
mod loss;
mod multihead;

pub use checkpoint::{
    decode_tensors, encode_tensors, read_checkpoint, sidecar_path, write_checkpoint, Checkpoint,
    CheckpointMeta, TensorRecord, CKPT_MAGIC,
};
pub use fusion::{backward_fusion, forward_fusion, FusionCache, FusionHead, PROJECTION_WIDTH};
pub use init::{glorot_bound, glorot_uniform, init_parameters};
pub use linear::{backward_linear, forward_linear, LinearHead};
pub use loss::{binary_cross_entropy, log_softmax_row, sigmoid, softmax_cross_entropy};
pub use multihead::{MultiCache, MultiHead, MultiLogits, Objective, TaskGrad, TRUNK_WIDTH};

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// A named view of one parameter tensor.
#[derive(Debug, Clone, Copy)]
pub struct TensorView<'a> {
    pub name: &'static str,
    pub shape: [usize; 2],
    pub data: &'a [f32],
}

pub trait Parameters {
    /// Every tensor, in a fixed order.
    fn tensors(&self) -> Vec<TensorView<'_>>;

    /// Mutable access in the same order as [`Parameters::tensors`].
    fn tensors_mut(&mut self) -> Vec<&mut [f32]>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }
}

/// One gradient buffer per parameter tensor, aligned with
/// [`Parameters::tensors`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like<P: Parameters + ?Sized>(params: &P) -> Self {
        Gradients(
            params
                .tensors()
                .iter()
                .map(|t| vec![0.0; t.data.len()])
                .collect(),
        )
    }

    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += factor * y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|&g| g == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// The architecture to build, with its dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeadShape {
    Linear {
        dim: usize,
        classes: usize,
    },
    Fusion {
        image_dim: usize,
        text_dim: usize,
        classes: usize,
    },
    Multi {
        dim: usize,
        classes: usize,
        genera: usize,
        species: usize,
    },
}

impl HeadShape {
    pub fn classes(&self) -> usize {
        match *self {
            HeadShape::Linear { classes, .. }
            | HeadShape::Fusion { classes, .. }
            | HeadShape::Multi { classes, .. } => classes,
        }
    }
}

/// Batch inputs: image embeddings and, for the fusion head, text embeddings.
#[derive(Debug, Clone, Copy)]
pub struct Inputs<'a> {
    pub image: &'a Matrix<f32>,
    pub text: Option<&'a Matrix<f32>>,
}

impl<'a> Inputs<'a> {
    pub fn image(image: &'a Matrix<f32>) -> Self {
        Self { image, text: None }
    }

    pub fn rows(&self) -> usize {
        self.image.rows()
    }
}

/// Any of the three heads.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Linear(LinearHead),
    Fusion(FusionHead),
    Multi(MultiHead),
}

impl Classifier {
    pub fn shape(&self) -> HeadShape {
        match self {
            Classifier::Linear(h) => HeadShape::Linear {
                dim: h.dim(),
                classes: h.classes(),
            },
            Classifier::Fusion(h) => HeadShape::Fusion {
                image_dim: h.image_dim(),
                text_dim: h.text_dim(),
                classes: h.classes(),
            },
            Classifier::Multi(h) => HeadShape::Multi {
                dim: h.dim(),
                classes: h.category.classes(),
                genera: h.genus.classes(),
                species: h.species.classes(),
            },
        }
    }

    pub fn classes(&self) -> usize {
        self.shape().classes()
    }

    /// Category logits for a batch.
    pub fn forward(&self, inputs: Inputs<'_>) -> Result<Matrix<f64>> {
        match self {
            Classifier::Linear(h) => forward_linear(h, inputs.image),
            Classifier::Fusion(h) => {
                let text = inputs.text.ok_or_else(|| {
                    Error::ShapeMismatch("fusion head needs text embeddings".into())
                })?;
                forward_fusion(h, inputs.image, text)
            }
            Classifier::Multi(h) => Ok(h.forward(inputs.image)?.category),
        }
    }

    pub fn needs_text(&self) -> bool {
        matches!(self, Classifier::Fusion(_))
    }
}

impl Parameters for Classifier {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        match self {
            Classifier::Linear(h) => h.tensors(),
            Classifier::Fusion(h) => h.tensors(),
            Classifier::Multi(h) => h.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        match self {
            Classifier::Linear(h) => h.tensors_mut(),
            Classifier::Fusion(h) => h.tensors_mut(),
            Classifier::Multi(h) => h.tensors_mut(),
        }
    }
}

pub(crate) fn check_finite(m: &Matrix<f64>, what: &'static str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteOutput(what))
    }
}

pub(crate) fn flatten(m: Matrix<f64>) -> Vec<f64> {
    m.into_vec()
}

pub(crate) fn renamed<'a>(
    mut views: Vec<TensorView<'a>>,
    weight: &'static str,
    bias: &'static str,
) -> Vec<TensorView<'a>> {
    views[0].name = weight;
    views[1].name = bias;
    views
}
