use super::{check_finite, flatten, Gradients, Parameters, TensorView};
use crate::matrix::{affine, affine_backward};
use crate::{Error, Matrix, Result};

/// Weight gradient, bias gradient and the optional input gradient.
pub(crate) type LayerGrads = (Vec<f64>, Vec<f64>, Option<Matrix<f64>>);

/// `logits = x·Wᵀ + b` with `W: C×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub weight: Matrix<f32>,
    pub bias: Vec<f32>,
}

impl LinearHead {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(classes, dim),
            bias: vec![0.0; classes],
        }
    }

    pub fn new(weight: Matrix<f32>, bias: Vec<f32>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::ShapeMismatch(format!(
                "weight has {} rows, bias {} entries",
                weight.rows(),
                bias.len()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn dim(&self) -> usize {
        self.weight.cols()
    }

    pub(crate) fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "head expects {} features, got {cols}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Forward pass over any element type that widens to f64.
    pub(crate) fn apply<X: Copy + Into<f64> + Default>(
        &self,
        x: &Matrix<X>,
    ) -> Result<Matrix<f64>> {
        self.check_input(x.cols())?;
        Ok(affine(x, &self.weight, &self.bias))
    }

    /// Parameter gradients, plus the input gradient when requested.
    pub(crate) fn grads<X: Copy + Into<f64> + Default>(
        &self,
        x: &Matrix<X>,
        grad_logits: &Matrix<f64>,
        want_input_grad: bool,
    ) -> Result<LayerGrads> {
        self.check_input(x.cols())?;
        if grad_logits.shape() != (x.rows(), self.classes()) {
            return Err(Error::ShapeMismatch(format!(
                "grad_logits is {:?}, expected ({}, {})",
                grad_logits.shape(),
                x.rows(),
                self.classes()
            )));
        }
        let (gw, gb, gx) = affine_backward(x, &self.weight, grad_logits, want_input_grad);
        Ok((flatten(gw), gb, gx))
    }
}

impl Parameters for LinearHead {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        vec![
            TensorView {
                name: "weight",
                shape: [self.weight.rows(), self.weight.cols()],
                data: self.weight.as_slice(),
            },
            TensorView {
                name: "bias",
                shape: [self.bias.len(), 1],
                data: &self.bias,
            },
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }
}

pub fn forward_linear(head: &LinearHead, features: &Matrix<f32>) -> Result<Matrix<f64>> {
    let logits = head.apply(features)?;
    check_finite(&logits, "linear logits")?;
    Ok(logits)
}

/// `∂L/∂W = gᵀ·x`, `∂L/∂b = Σ_rows g`.
pub fn backward_linear(
    head: &LinearHead,
    features: &Matrix<f32>,
    grad_logits: &Matrix<f64>,
) -> Result<Gradients> {
    let (gw, gb, _) = head.grads(features, grad_logits, false)?;
    Ok(Gradients(vec![gw, gb]))
}
