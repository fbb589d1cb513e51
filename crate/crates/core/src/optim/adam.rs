use serde::{Deserialize, Serialize};

use crate::model::{Gradients, Parameters};
use crate::{Error, Result};

/// Bias-corrected Adam with one pair of moment buffers per tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step_count: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn with_sizes(sizes: &[usize], lr: f64) -> Self {
        Self {
            step_count: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn for_params<P: Parameters + ?Sized>(params: &P, lr: f64) -> Self {
        let sizes: Vec<usize> = params.tensors().iter().map(|t| t.data.len()).collect();
        Self::with_sizes(&sizes, lr)
    }

    fn check(&self, sizes: &[usize], grads: &[Vec<f64>]) -> Result<()> {
        let ok = sizes.len() == self.m.len()
            && grads.len() == self.m.len()
            && sizes
                .iter()
                .zip(grads)
                .zip(&self.m)
                .all(|((&n, g), m)| n == g.len() && n == m.len());
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(
                "parameters, gradients and Adam moments disagree".into(),
            ))
        }
    }

    /// Advances the step and returns the two bias corrections.
    fn advance(&mut self) -> (f64, f64) {
        self.step_count += 1;
        let t = self.step_count as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }

    fn delta(&mut self, tensor: usize, i: usize, g: f64, bc1: f64, bc2: f64) -> f64 {
        let m = &mut self.m[tensor][i];
        let v = &mut self.v[tensor][i];
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        self.lr * m_hat / (v_hat.sqrt() + self.epsilon)
    }

    /// One update of f32 tensors in place.
    pub fn step_tensors(&mut self, params: Vec<&mut [f32]>, grads: &[Vec<f64>]) -> Result<()> {
        let sizes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        self.check(&sizes, grads)?;
        let (bc1, bc2) = self.advance();
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            for (i, (x, &gi)) in p.iter_mut().zip(g).enumerate() {
                *x = (f64::from(*x) - self.delta(k, i, gi, bc1, bc2)) as f32;
            }
        }
        Ok(())
    }

    /// One update of a single f64 vector, e.g. task weights.
    pub fn step_vector(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if self.m.len() != 1 || self.m[0].len() != params.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch(
                "vector, gradient and Adam moments disagree".into(),
            ));
        }
        let (bc1, bc2) = self.advance();
        for (i, (x, &g)) in params.iter_mut().zip(grads).enumerate() {
            *x -= self.delta(0, i, g, bc1, bc2);
        }
        Ok(())
    }
}

pub fn adam_step<P: Parameters + ?Sized>(
    params: &mut P,
    grads: &Gradients,
    state: &mut AdamState,
) -> Result<()> {
    state.step_tensors(params.tensors_mut(), &grads.0)
}
