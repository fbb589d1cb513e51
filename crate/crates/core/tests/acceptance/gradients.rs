use std::time::Instant;

use longtail::model::{
    backward_fusion, backward_linear, binary_cross_entropy, forward_fusion, forward_linear,
    init_parameters, softmax_cross_entropy, Classifier, FusionHead, Gradients, HeadShape,
    LinearHead, MultiHead, Objective, Parameters,
};
use longtail::Matrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{ensure, tol, within_budget, Outcome};

const STEP: f64 = 1e-3;
const WIDE_SAMPLES: usize = 40;

fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f32) -> Matrix<f32> {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn linear(rng: &mut ChaCha8Rng, out: usize, dim: usize) -> LinearHead {
    let bias = (0..out).map(|_| rng.random_range(-0.5..0.5)).collect();
    LinearHead::new(matrix(rng, out, dim, 1.0), bias).unwrap()
}

fn classes(rng: &mut ChaCha8Rng, b: usize, c: usize) -> Vec<usize> {
    (0..b).map(|_| rng.random_range(0..c)).collect()
}

fn column(m: &Matrix<f64>) -> Vec<f64> {
    (0..m.rows()).map(|i| m.get(i, 0)).collect()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(tol::GRAD_REL_FLOOR)
}

/// Largest relative error between `analytic` and central differences of
/// `loss`, over every coordinate or `sample` random ones per tensor.
fn compare<P: Parameters + Clone>(
    model: &P,
    loss: impl Fn(&P) -> f64,
    analytic: &Gradients,
    sample: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.data.len()).collect();
    let mut worst = 0.0f64;
    for (t, &len) in sizes.iter().enumerate() {
        let coords: Vec<usize> = match sample {
            Some(k) if k < len => (0..k).map(|_| rng.random_range(0..len)).collect(),
            _ => (0..len).collect(),
        };
        for j in coords {
            let p = f64::from(model.tensors()[t].data[j]);
            let plus = (p + STEP) as f32;
            let minus = (p - STEP) as f32;
            let eval = |v: f32| {
                let mut m = model.clone();
                m.tensors_mut()[t][j] = v;
                loss(&m)
            };
            let numeric = (eval(plus) - eval(minus)) / (f64::from(plus) - f64::from(minus));
            worst = worst.max(rel_err(analytic.0[t][j], numeric));
        }
    }
    worst
}

fn linear_ce(rng: &mut ChaCha8Rng) -> f64 {
    let (b, d, c) = (
        rng.random_range(1..=8),
        rng.random_range(1..=10),
        rng.random_range(2..=8),
    );
    let head = linear(rng, c, d);
    let x = matrix(rng, b, d, 2.0);
    let y = classes(rng, b, c);
    let loss = |h: &LinearHead| softmax_cross_entropy(&forward_linear(h, &x).unwrap(), &y).unwrap();
    let (_, g) = loss(&head);
    let analytic = backward_linear(&head, &x, &g).unwrap();
    compare(&head, |h| loss(h).0, &analytic, None, rng)
}

fn linear_bce(rng: &mut ChaCha8Rng) -> f64 {
    let (b, d) = (rng.random_range(1..=8), rng.random_range(1..=10));
    let head = linear(rng, 1, d);
    let x = matrix(rng, b, d, 2.0);
    let y: Vec<bool> = (0..b).map(|_| rng.random()).collect();
    let loss = |h: &LinearHead| {
        binary_cross_entropy(&column(&forward_linear(h, &x).unwrap()), &y).unwrap()
    };
    let (_, g) = loss(&head);
    let g = Matrix::from_vec(b, 1, g).unwrap();
    let analytic = backward_linear(&head, &x, &g).unwrap();
    compare(&head, |h| loss(h).0, &analytic, None, rng)
}

fn fusion_check(head: &FusionHead, rng: &mut ChaCha8Rng, sample: Option<usize>) -> f64 {
    let b = rng.random_range(1..=6);
    let image = matrix(rng, b, head.image_dim(), 2.0);
    let text = matrix(rng, b, head.text_dim(), 2.0);
    let y = classes(rng, b, head.classes());
    let loss = |h: &FusionHead| {
        softmax_cross_entropy(&forward_fusion(h, &image, &text).unwrap(), &y).unwrap()
    };
    let (_, g) = loss(head);
    let analytic = backward_fusion(head, &image, &text, &g).unwrap();
    compare(head, |h| loss(h).0, &analytic, sample, rng)
}

fn fusion_small(rng: &mut ChaCha8Rng) -> f64 {
    let (di, dt) = (rng.random_range(1..=6), rng.random_range(1..=6));
    let (wp, wq) = (rng.random_range(1..=5), rng.random_range(1..=5));
    let c = rng.random_range(2..=6);
    let head = FusionHead::new(
        linear(rng, wp, di),
        linear(rng, wq, dt),
        linear(rng, c, wp + wq),
    )
    .unwrap();
    fusion_check(&head, rng, None)
}

/// `Σ_k w_k·L_k` over all four objectives, with the poisonous head scored by
/// binary cross-entropy.
fn multi_check(model: &MultiHead, rng: &mut ChaCha8Rng, sample: Option<usize>) -> f64 {
    let b = rng.random_range(1..=6);
    let x = matrix(rng, b, model.dim(), 2.0);
    let targets: Vec<Vec<usize>> = [Objective::Category, Objective::Genus, Objective::Species]
        .iter()
        .map(|&o| classes(rng, b, model.head(o).classes()))
        .collect();
    let toxic: Vec<bool> = (0..b).map(|_| rng.random()).collect();
    let weights: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..2.0)).collect();
    let task = |o: Objective, logits: &Matrix<f64>| -> (f64, Matrix<f64>) {
        match o {
            Objective::Poisonous => {
                let (l, g) = binary_cross_entropy(&column(logits), &toxic).unwrap();
                (l, Matrix::from_vec(g.len(), 1, g).unwrap())
            }
            Objective::Category => softmax_cross_entropy(logits, &targets[0]).unwrap(),
            Objective::Genus => softmax_cross_entropy(logits, &targets[1]).unwrap(),
            Objective::Species => softmax_cross_entropy(logits, &targets[2]).unwrap(),
        }
    };
    let loss = |m: &MultiHead| {
        let logits = m.forward(&x).unwrap();
        Objective::ALL
            .iter()
            .zip(&weights)
            .map(|(&o, w)| w * task(o, logits.get(o)).0)
            .sum::<f64>()
    };
    let (logits, cache) = model.forward_cached(&x).unwrap();
    let tasks: Vec<(f64, _)> = Objective::ALL
        .iter()
        .zip(&weights)
        .map(|(&o, &w)| {
            let (_, g) = task(o, logits.get(o));
            (w, model.task_backward(&x, &cache, o, &g).unwrap())
        })
        .collect();
    let analytic = model.combine(&tasks).unwrap();
    compare(model, loss, &analytic, sample, rng)
}

fn multi_small(rng: &mut ChaCha8Rng) -> f64 {
    let d = rng.random_range(1..=6);
    let w = rng.random_range(1..=5);
    let (c, g, s) = (
        rng.random_range(2..=5),
        rng.random_range(2..=4),
        rng.random_range(2..=5),
    );
    let model = MultiHead {
        trunk: linear(rng, w, d),
        category: linear(rng, c, w),
        poisonous: linear(rng, 1, w),
        genus: linear(rng, g, w),
        species: linear(rng, s, w),
    };
    multi_check(&model, rng, None)
}

/// Full-width heads from the default initializer, checked on sampled
/// coordinates.
fn wide(rng: &mut ChaCha8Rng, seed: u64) -> (f64, f64) {
    let Classifier::Fusion(f) = init_parameters(
        HeadShape::Fusion {
            image_dim: 6,
            text_dim: 5,
            classes: 4,
        },
        seed,
    ) else {
        unreachable!()
    };
    let Classifier::Multi(m) = init_parameters(
        HeadShape::Multi {
            dim: 6,
            classes: 4,
            genera: 3,
            species: 5,
        },
        seed,
    ) else {
        unreachable!()
    };
    (
        fusion_check(&f, rng, Some(WIDE_SAMPLES)),
        multi_check(&m, rng, Some(WIDE_SAMPLES)),
    )
}

pub fn check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut errors: Vec<(&str, f64)> = Vec::new();
    for _ in 0..8 {
        errors.push(("linear+ce", linear_ce(&mut rng)));
    }
    for _ in 0..4 {
        errors.push(("linear+bce", linear_bce(&mut rng)));
    }
    for _ in 0..6 {
        errors.push(("fusion", fusion_small(&mut rng)));
    }
    for _ in 0..5 {
        errors.push(("multi", multi_small(&mut rng)));
    }
    for seed in 0..2 {
        let (f, m) = wide(&mut rng, seed);
        errors.push(("fusion-256", f));
        errors.push(("multi-256", m));
    }
    let elapsed = start.elapsed();
    let (kind, worst) = errors
        .iter()
        .copied()
        .fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    ensure(errors.len() >= tol::GRAD_MIN_SHAPES, || {
        format!("only {} shapes", errors.len())
    })?;
    ensure(worst < tol::GRAD_REL_ERR, || {
        format!("max relative error {worst:.3e} on {kind}")
    })?;
    within_budget(elapsed, tol::GRAD_BUDGET)?;
    Ok(format!(
        "{} shapes, max relative error {worst:.2e} ({kind})",
        errors.len()
    ))
}
