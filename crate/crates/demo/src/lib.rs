//! Browser bindings for three interactive views: the mixup λ distribution,
//! class balance under weighted vs uniform sampling, and a single mixup
//! pair.

use longtail::augment::{mix_batch, sample_lambda, MixupConfig};
use longtail::dataio::{LabelSpace, SyntheticSpec};
use longtail::rng::{domain, stream};
use longtail::sampling::{compute_sample_weights, draw_epoch, draw_unweighted_epoch};
use longtail::Matrix;
use wasm_bindgen::prelude::*;

fn js(e: longtail::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Counts of `draws` samples of λ ~ Beta(α, α) in `bins` equal bins on [0, 1].
#[wasm_bindgen]
pub fn lambda_histogram(alpha: f64, draws: u32, bins: u32, seed: u64) -> Result<Vec<u32>, JsError> {
    if bins == 0 {
        return Err(JsError::new("bins must be positive"));
    }
    let mut rng = stream(seed, &[domain::MIXUP]);
    let mut hist = vec![0u32; bins as usize];
    for _ in 0..draws {
        let l = sample_lambda(alpha, &mut rng).map_err(js)?;
        let b = ((l * f64::from(bins)) as usize).min(bins as usize - 1);
        hist[b] += 1;
    }
    Ok(hist)
}

/// Per-class sample counts over `epochs` epochs of a geometric long-tail
/// training set (`head` images for the first class down to `tail`).
#[wasm_bindgen]
pub fn sampler_balance(
    classes: u32,
    head: u32,
    tail: u32,
    weighted: bool,
    epochs: u32,
    seed: u64,
) -> Result<Vec<u32>, JsError> {
    let spec = SyntheticSpec {
        num_classes: classes as usize,
        dim: 2,
        head_count: head as usize,
        tail_count: tail as usize,
        cluster_spread: 0.0,
        seed,
    };
    spec.validate().map_err(js)?;
    let counts = spec.class_counts();
    let rows: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    let names = (0..counts.len()).map(|c| spec.category_id(c)).collect();
    let labels = LabelSpace::from_parts(names, counts);
    let weights = compute_sample_weights(&labels, &rows).map_err(js)?;
    let mut hist = vec![0u32; classes as usize];
    for epoch in 0..epochs as usize {
        let plan = if weighted {
            draw_epoch(&weights, 256, seed, epoch)
        } else {
            draw_unweighted_epoch(rows.len(), 256, seed, epoch)
        }
        .map_err(js)?;
        for i in plan.batches.iter().flatten() {
            hist[rows[*i]] += 1;
        }
    }
    Ok(hist)
}

/// Mixes the two-row batch `a`, `b` once. Returns `[λ, x0, y0, x1, y1]`:
/// the coefficient and both mixed rows.
#[wasm_bindgen]
pub fn mixup_probe(
    alpha: f64,
    ax: f32,
    ay: f32,
    bx: f32,
    by: f32,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let x = Matrix::from_rows(&[[ax, ay], [bx, by]]).map_err(js)?;
    let mut rng = stream(seed, &[domain::MIXUP]);
    let m = mix_batch(&x, &[0, 1], &MixupConfig::with_alpha(alpha), &mut rng).map_err(js)?;
    let mut out = vec![m.lambda];
    out.extend(m.mixed_features.as_slice().iter().map(|&v| f64::from(v)));
    Ok(out)
}
