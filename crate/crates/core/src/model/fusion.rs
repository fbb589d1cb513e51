use super::linear::LinearHead;
use super::{check_finite, renamed, Gradients, Parameters, TensorView};
use crate::{Error, Matrix, Result};

/// Output width of each modality projection.
pub const PROJECTION_WIDTH: usize = 256;

/// Image and text projections, concatenated, L2-normalized, then classified.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionHead {
    pub image_proj: LinearHead,
    pub text_proj: LinearHead,
    pub output: LinearHead,
}

/// Forward intermediates kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionCache {
    /// Concatenated projections before normalization.
    pub hidden: Matrix<f64>,
    /// Row-normalized hidden vectors, the output layer's input.
    pub normalized: Matrix<f64>,
    pub norms: Vec<f64>,
}

impl FusionHead {
    pub fn new(image_proj: LinearHead, text_proj: LinearHead, output: LinearHead) -> Result<Self> {
        let width = image_proj.classes() + text_proj.classes();
        if output.dim() != width {
            return Err(Error::ShapeMismatch(format!(
                "output layer expects {} inputs, projections give {width}",
                output.dim()
            )));
        }
        Ok(Self {
            image_proj,
            text_proj,
            output,
        })
    }

    pub fn zeros(image_dim: usize, text_dim: usize, classes: usize) -> Self {
        Self {
            image_proj: LinearHead::zeros(PROJECTION_WIDTH, image_dim),
            text_proj: LinearHead::zeros(PROJECTION_WIDTH, text_dim),
            output: LinearHead::zeros(classes, 2 * PROJECTION_WIDTH),
        }
    }

    pub fn image_dim(&self) -> usize {
        self.image_proj.dim()
    }

    pub fn text_dim(&self) -> usize {
        self.text_proj.dim()
    }

    pub fn classes(&self) -> usize {
        self.output.classes()
    }

    /// Logits together with the intermediates of the forward pass.
    pub fn forward_cached(
        &self,
        image: &Matrix<f32>,
        text: &Matrix<f32>,
    ) -> Result<(Matrix<f64>, FusionCache)> {
        if image.rows() != text.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} image rows but {} text rows",
                image.rows(),
                text.rows()
            )));
        }
        let p = self.image_proj.apply(image)?;
        let q = self.text_proj.apply(text)?;
        let (wp, wq) = (p.cols(), q.cols());
        let b = image.rows();
        let mut hidden = Matrix::zeros(b, wp + wq);
        let mut normalized = Matrix::zeros(b, wp + wq);
        let mut norms = Vec::with_capacity(b);
        for i in 0..b {
            let h = hidden.row_mut(i);
            h[..wp].copy_from_slice(p.row(i));
            h[wp..].copy_from_slice(q.row(i));
            let n = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            let out = normalized.row_mut(i);
            out.copy_from_slice(hidden.row(i));
            if n > 0.0 {
                out.iter_mut().for_each(|v| *v /= n);
            }
            norms.push(n);
        }
        let logits = self.output.apply(&normalized)?;
        check_finite(&logits, "fusion logits")?;
        Ok((
            logits,
            FusionCache {
                hidden,
                normalized,
                norms,
            },
        ))
    }

    /// The normalized hidden vectors the output layer sees.
    pub fn hidden(&self, image: &Matrix<f32>, text: &Matrix<f32>) -> Result<Matrix<f64>> {
        Ok(self.forward_cached(image, text)?.1.normalized)
    }
}

impl Parameters for FusionHead {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut out = renamed(self.image_proj.tensors(), "image_weight", "image_bias");
        out.extend(renamed(
            self.text_proj.tensors(),
            "text_weight",
            "text_bias",
        ));
        out.extend(renamed(self.output.tensors(), "out_weight", "out_bias"));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out = self.image_proj.tensors_mut();
        out.extend(self.text_proj.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }
}

pub fn forward_fusion(
    head: &FusionHead,
    image: &Matrix<f32>,
    text: &Matrix<f32>,
) -> Result<Matrix<f64>> {
    Ok(head.forward_cached(image, text)?.0)
}

/// Gradients for every fusion tensor. Through the normalization,
/// `∂L/∂h = (g − ĥ(ĥ·g)) / ‖h‖`; rows whose hidden vector is zero pass no
/// gradient back to the projections.
pub fn backward_fusion(
    head: &FusionHead,
    image: &Matrix<f32>,
    text: &Matrix<f32>,
    grad_logits: &Matrix<f64>,
) -> Result<Gradients> {
    let (_, cache) = head.forward_cached(image, text)?;
    let (gw_out, gb_out, g_hat) = head.output.grads(&cache.normalized, grad_logits, true)?;
    let g_hat = g_hat.expect("input gradient requested");
    let wp = head.image_proj.classes();
    let b = image.rows();
    let mut gp = Matrix::zeros(b, wp);
    let mut gq = Matrix::zeros(b, head.text_proj.classes());
    for i in 0..b {
        let n = cache.norms[i];
        if n == 0.0 {
            continue;
        }
        let hat = cache.normalized.row(i);
        let g = g_hat.row(i);
        let dot: f64 = hat.iter().zip(g).map(|(a, b)| a * b).sum();
        for (k, (&hk, &gk)) in hat.iter().zip(g).enumerate() {
            let dh = (gk - hk * dot) / n;
            if k < wp {
                gp.set(i, k, dh);
            } else {
                gq.set(i, k - wp, dh);
            }
        }
    }
    let (gw_img, gb_img, _) = head.image_proj.grads(image, &gp, false)?;
    let (gw_txt, gb_txt, _) = head.text_proj.grads(text, &gq, false)?;
    Ok(Gradients(vec![
        gw_img, gb_img, gw_txt, gb_txt, gw_out, gb_out,
    ]))
}
