use std::time::Instant;

use longtail::dataio::{LabelSpace, SyntheticSpec};
use longtail::sampling::{compute_sample_weights, draw_epoch};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{ensure, tol, within_budget, Outcome};

pub fn check() -> Outcome {
    let start = Instant::now();
    let spec = SyntheticSpec {
        num_classes: 50,
        dim: 2,
        head_count: 30,
        tail_count: 1,
        cluster_spread: 0.0,
        seed: 0,
    };
    let counts = spec.class_counts();
    ensure(counts[0] == 30 && counts[counts.len() - 1] == 1, || {
        format!("counts run {} to {}", counts[0], counts[counts.len() - 1])
    })?;
    let c = counts.len();
    let labels = LabelSpace::from_parts(
        (0..c).map(|k| spec.category_id(k)).collect(),
        counts.clone(),
    );
    let rows: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
        .collect();
    let weights = compute_sample_weights(&labels, &rows).map_err(|e| e.to_string())?;

    let mut observed = vec![0usize; c];
    let mut drawn = 0;
    let mut epoch = 0;
    while drawn < tol::SAMPLER_DRAWS {
        let plan = draw_epoch(&weights, 256, 7, epoch).map_err(|e| e.to_string())?;
        for &i in plan
            .batches
            .iter()
            .flatten()
            .take(tol::SAMPLER_DRAWS - drawn)
        {
            observed[rows[i]] += 1;
            drawn += 1;
        }
        epoch += 1;
    }
    let expected = tol::SAMPLER_DRAWS as f64 / c as f64;
    let stat: f64 = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((c - 1) as f64).map_err(|e| e.to_string())?;
    let p = 1.0 - dist.cdf(stat);
    let elapsed = start.elapsed();
    ensure(p > tol::SAMPLER_MIN_P, || {
        format!("chi-square {stat:.2} on {} dof, p = {p:.2e}", c - 1)
    })?;
    within_budget(elapsed, tol::SAMPLER_BUDGET)?;
    Ok(format!(
        "{c} classes, {drawn} draws, chi-square {stat:.2}, p = {p:.3}"
    ))
}
