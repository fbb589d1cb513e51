use longtail::augment::{mix_batch, mixup_loss, MixupBatch, MixupConfig};
use longtail::model::softmax_cross_entropy;
use longtail::optim::{task_loss, MixedTargets, TaskLabels};
use longtail::{rng, Matrix};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::{ensure, tol, Outcome};

fn batch(lambda: f64, permutation: Vec<usize>, labels: &[usize]) -> MixupBatch {
    MixupBatch {
        mixed_features: Matrix::zeros(0, 0),
        labels_i: labels.to_vec(),
        labels_j: permutation.iter().map(|&p| labels[p]).collect(),
        lambda,
        permutation,
    }
}

pub fn check() -> Outcome {
    let mut r = rng::stream(11, &[]);
    let (b, d, c) = (16, 12, 7);
    let data: Vec<f32> = (0..b * d).map(|_| r.random_range(-5.0..5.0)).collect();
    let x = Matrix::from_vec(b, d, data).unwrap();
    let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..c)).collect();
    let logits_data: Vec<f64> = (0..b * c).map(|_| r.random_range(-3.0..3.0)).collect();
    let logits = Matrix::from_vec(b, c, logits_data).unwrap();
    let mut perm: Vec<usize> = (0..b).collect();
    perm.shuffle(&mut r);

    let ce = |p: &Matrix<f64>, y: &[usize]| softmax_cross_entropy(p, y).map(|(l, _)| l);
    let end = |lambda: f64| mixup_loss(ce, &logits, &batch(lambda, perm.clone(), &labels)).unwrap();
    let (l0, l1) = (end(0.0), end(1.0));
    let targets = |lambda: f64| MixedTargets {
        lambda,
        labels_i: TaskLabels::Classes(labels.clone()),
        labels_j: TaskLabels::Classes(perm.iter().map(|&p| labels[p]).collect()),
    };
    let (_, g0) = task_loss(&logits, &targets(0.0)).unwrap();
    let (_, g1) = task_loss(&logits, &targets(1.0)).unwrap();

    let mut worst_mix = 0.0f64;
    let mut worst_loss = 0.0f64;
    for lambda in tol::MIXUP_LAMBDAS {
        let mb = batch(lambda, perm.clone(), &labels);
        let mixed = mb.mix_other(&x).unwrap();
        for i in 0..b {
            for k in 0..d {
                let (a, o) = (f64::from(x.get(i, k)), f64::from(x.get(perm[i], k)));
                let m = f64::from(mixed.get(i, k));
                worst_mix = worst_mix.max((m - (lambda * a + (1.0 - lambda) * o)).abs());
                ensure(m >= a.min(o) && m <= a.max(o), || {
                    format!("entry ({i},{k}) at lambda {lambda} leaves its segment")
                })?;
            }
        }
        let l = mixup_loss(ce, &logits, &mb).unwrap();
        worst_loss = worst_loss.max((l - (lambda * l1 + (1.0 - lambda) * l0)).abs());
        let (lt, g) = task_loss(&logits, &targets(lambda)).unwrap();
        worst_loss = worst_loss.max((lt - l).abs());
        for ((gv, a), z) in g.as_slice().iter().zip(g1.as_slice()).zip(g0.as_slice()) {
            worst_loss = worst_loss.max((gv - (lambda * a + (1.0 - lambda) * z)).abs());
        }
    }
    ensure(worst_mix <= tol::MIXUP_ABS, || {
        format!("convex combination off by {worst_mix:.2e}")
    })?;
    ensure(worst_loss <= tol::MIXUP_ABS, || {
        format!("loss not linear in lambda, off by {worst_loss:.2e}")
    })?;

    let identity: Vec<usize> = (0..b).collect();
    for lambda in tol::MIXUP_LAMBDAS.into_iter().chain([0.123, 0.987]) {
        let same = batch(lambda, identity.clone(), &labels)
            .mix_other(&x)
            .unwrap();
        ensure(
            same.as_slice()
                .iter()
                .zip(x.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits()),
            || format!("self-mix at lambda {lambda} is not the identity"),
        )?;
    }
    let twins = Matrix::from_rows(&[x.row(0), x.row(0), x.row(0)]).unwrap();
    for seed in 0..20 {
        let mut r = rng::stream(seed, &[]);
        let mb = mix_batch(&twins, &[1, 1, 1], &MixupConfig::with_alpha(1.2), &mut r).unwrap();
        ensure(mb.mixed_features == twins, || {
            format!("identical rows changed under mixing (seed {seed})")
        })?;
    }
    Ok(format!(
        "max convexity error {worst_mix:.1e}, max linearity error {worst_loss:.1e}, self-mix exact"
    ))
}
