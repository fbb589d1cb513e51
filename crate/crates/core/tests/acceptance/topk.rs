use longtail::eval::{topk_accuracy, PredictionSet};
use longtail::{rng, Matrix};
use rand::Rng;

use crate::{ensure, tol, Outcome};

/// Hits at every `k`, from a full sort by score then class index.
fn brute_force(scores: &[Vec<f64>], labels: &[usize], c: usize) -> Vec<usize> {
    let mut hits = vec![0usize; c + 1];
    for (row, &t) in scores.iter().zip(labels) {
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
        let rank = order.iter().position(|&j| j == t).unwrap();
        for h in hits.iter_mut().skip(rank + 1) {
            *h += 1;
        }
    }
    hits
}

pub fn check() -> Outcome {
    let mut r = rng::stream(42, &[]);
    let mut tied = 0;
    for instance in 0..tol::TOPK_INSTANCES {
        let b = r.random_range(1..=tol::TOPK_MAX_ROWS);
        let c = r.random_range(1..=tol::TOPK_MAX_CLASSES);
        let coarse = instance % 2 == 0;
        let scores: Vec<Vec<f64>> = (0..b)
            .map(|_| {
                (0..c)
                    .map(|_| {
                        if coarse {
                            f64::from(r.random_range(0..4u8))
                        } else {
                            r.random_range(-10.0..10.0)
                        }
                    })
                    .collect()
            })
            .collect();
        if coarse {
            tied += 1;
        }
        let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..c)).collect();
        let preds = PredictionSet::new(
            Matrix::from_rows(&scores).unwrap(),
            Some(labels.clone()),
            (0..b).map(|i| i.to_string()).collect(),
        )
        .map_err(|e| e.to_string())?;
        let oracle = brute_force(&scores, &labels, c);
        let mut prev = 0.0;
        for k in 1..=c {
            let acc = topk_accuracy(&preds, k).map_err(|e| e.to_string())?;
            let want = oracle[k] as f64 / b as f64;
            ensure(acc == want, || {
                format!("instance {instance} (B={b}, C={c}) k={k}: {acc} vs oracle {want}")
            })?;
            ensure(acc >= prev, || {
                format!("instance {instance}: accuracy drops at k={k}")
            })?;
            prev = acc;
        }
        ensure(prev == 1.0, || {
            format!("instance {instance}: top-C below 1")
        })?;
    }
    Ok(format!(
        "{} instances ({tied} with heavy ties), every k agrees with the full sort",
        tol::TOPK_INSTANCES
    ))
}
