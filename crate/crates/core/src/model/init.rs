use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{Classifier, FusionHead, HeadShape, LinearHead, MultiHead, Parameters};
use crate::rng::{self, domain};
use crate::Matrix;

/// `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// A `fan_out × fan_in` matrix drawn uniformly within the Glorot bound.
pub fn glorot_uniform<R: Rng + ?Sized>(fan_out: usize, fan_in: usize, rng: &mut R) -> Matrix<f32> {
    let exact = glorot_bound(fan_in, fan_out);
    let mut bound = exact as f32;
    if f64::from(bound) > exact {
        bound = bound.next_down();
    }
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let data = (0..fan_out * fan_in).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(fan_out, fan_in, data).expect("sized above")
}

/// Glorot-uniform weights and zero biases; each weight tensor has its own
/// stream so the result depends only on `shape` and `seed`.
pub fn init_parameters(shape: HeadShape, seed: u64) -> Classifier {
    let mut model = match shape {
        HeadShape::Linear { dim, classes } => Classifier::Linear(LinearHead::zeros(classes, dim)),
        HeadShape::Fusion {
            image_dim,
            text_dim,
            classes,
        } => Classifier::Fusion(FusionHead::zeros(image_dim, text_dim, classes)),
        HeadShape::Multi {
            dim,
            classes,
            genera,
            species,
        } => Classifier::Multi(MultiHead::zeros(dim, classes, genera, species)),
    };
    let shapes: Vec<(bool, [usize; 2])> = model
        .tensors()
        .iter()
        .map(|t| (t.name.ends_with("bias"), t.shape))
        .collect();
    for (i, (data, (is_bias, [rows, cols]))) in
        model.tensors_mut().into_iter().zip(shapes).enumerate()
    {
        if is_bias {
            continue;
        }
        let mut r = rng::stream(seed, &[domain::INIT, i as u64]);
        data.copy_from_slice(glorot_uniform(rows, cols, &mut r).as_slice());
    }
    model
}
