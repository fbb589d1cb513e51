use std::time::Instant;

use longtail::augment::MixupConfig;
use longtail::dataio::{
    build_label_space, generate_holdout, generate_synthetic, Dataset, EmbeddingTable, LabelSpace,
    ObservationRecord, Split, SyntheticSpec,
};
use longtail::eval::{per_class_topk, topk_accuracy};
use longtail::optim::{labeled_predictions, train, Preset, TrainConfig, TrainInputs};
use longtail::Matrix;

use crate::{ensure, tol, within_budget, Outcome};

struct Splits {
    train: Dataset,
    val: Dataset,
    test: Dataset,
    labels: LabelSpace,
}

fn splits(spec: &SyntheticSpec, val_per_class: usize, test_per_class: usize) -> Splits {
    let (img, recs) = generate_synthetic(spec).unwrap();
    let train = Dataset::new(img, None, recs).unwrap();
    let (v, vr) = generate_holdout(spec, val_per_class, Split::Val, 1).unwrap();
    let (t, tr) = generate_holdout(spec, test_per_class, Split::Test, 2).unwrap();
    let labels = build_label_space(&train.records).unwrap();
    Splits {
        train,
        val: Dataset::new(v, None, vr).unwrap(),
        test: Dataset::new(t, None, tr).unwrap(),
        labels,
    }
}

fn inputs(s: &Splits) -> TrainInputs<'_> {
    TrainInputs {
        train: &s.train,
        val: &s.val,
        labels: &s.labels,
    }
}

pub fn separable() -> Outcome {
    let start = Instant::now();
    let s = splits(
        &SyntheticSpec {
            num_classes: 5,
            dim: 768,
            head_count: 20,
            tail_count: 2,
            cluster_spread: 0.0,
            seed: 3,
        },
        10,
        0,
    );
    let out = train(&inputs(&s), &Preset::Baseline.config()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let first = out
        .log
        .records
        .iter()
        .find(|r| r.val_top1 == 1.0)
        .map(|r| r.epoch);
    let train_top1 = topk_accuracy(
        &labeled_predictions(&out.model, &s.train, &s.labels).map_err(|e| e.to_string())?,
        1,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        first.is_some_and(|e| e <= tol::SEPARABLE_MAX_EPOCHS),
        || {
            format!(
                "validation top-1 never reached 1.0 in {} epochs",
                out.log.epochs()
            )
        },
    )?;
    ensure(train_top1 == 1.0, || format!("training top-1 {train_top1}"))?;
    within_budget(elapsed, tol::SEPARABLE_BUDGET)?;
    Ok(format!(
        "validation top-1 = 1.0 at epoch {}, training top-1 = 1.0",
        first.unwrap()
    ))
}

struct SeedResult {
    baseline_top5: f64,
    baseline_tail: f64,
    treated_tail: f64,
}

fn tail_top5(out: &longtail::optim::TrainOutcome, s: &Splits) -> longtail::Result<(f64, f64)> {
    let preds = labeled_predictions(&out.model, &s.test, &s.labels)?;
    let overall = topk_accuracy(&preds, 5)?;
    let (mut hits, mut n) = (0.0, 0.0);
    for c in per_class_topk(&preds, 5, &s.labels)? {
        if s.labels.counts()[c.class_index] <= tol::IMBALANCE_TAIL_COUNT {
            hits += c.topk_acc * c.frequency as f64;
            n += c.frequency as f64;
        }
    }
    Ok((overall, hits / n))
}

fn imbalance_seed(seed: u64) -> longtail::Result<SeedResult> {
    let s = splits(
        &SyntheticSpec {
            num_classes: 50,
            dim: tol::IMBALANCE_DIM,
            head_count: 30,
            tail_count: 1,
            cluster_spread: tol::IMBALANCE_SPREAD,
            seed,
        },
        10,
        20,
    );
    let baseline = TrainConfig {
        seed,
        ..Preset::Baseline.config()
    };
    let treated = TrainConfig {
        mixup: MixupConfig::with_alpha(1.2),
        weighted_sampling: true,
        ..baseline.clone()
    };
    let (baseline_top5, baseline_tail) = tail_top5(&train(&inputs(&s), &baseline)?, &s)?;
    let (_, treated_tail) = tail_top5(&train(&inputs(&s), &treated)?, &s)?;
    Ok(SeedResult {
        baseline_top5,
        baseline_tail,
        treated_tail,
    })
}

pub fn imbalance() -> Outcome {
    let results: Vec<longtail::Result<SeedResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..tol::IMBALANCE_SEEDS)
            .map(|seed| scope.spawn(move || imbalance_seed(seed)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let results = results
        .into_iter()
        .collect::<longtail::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let (lo, hi) = tol::IMBALANCE_BASELINE_RANGE;
    let mean = results.iter().map(|r| r.baseline_top5).sum::<f64>() / results.len() as f64;
    let min = results.iter().map(|r| r.baseline_top5).fold(1.0, f64::min);
    let max = results.iter().map(|r| r.baseline_top5).fold(0.0, f64::max);
    ensure(min >= lo && max <= hi, || {
        format!("baseline top-5 spans [{min:.3}, {max:.3}], outside [{lo}, {hi}]")
    })?;
    let wins = results
        .iter()
        .filter(|r| r.treated_tail >= r.baseline_tail)
        .count();
    let gain = results
        .iter()
        .map(|r| r.treated_tail - r.baseline_tail)
        .sum::<f64>()
        / results.len() as f64;
    ensure(wins >= tol::IMBALANCE_MIN_WINS, || {
        format!(
            "tail top-5 improved in only {wins} of {} seeds",
            results.len()
        )
    })?;
    Ok(format!(
        "baseline top-5 mean {mean:.3} in [{min:.3}, {max:.3}], tail wins {wins}/{}, mean tail gain {gain:+.3}",
        results.len()
    ))
}

/// One class, so validation accuracy is 1.0 from the first epoch on.
fn constant_validation() -> (Dataset, Dataset, LabelSpace) {
    let make = |n: usize, split: Split, offset: f32| {
        let rows: Vec<Vec<f32>> = (0..n).map(|i| vec![i as f32 + offset, 1.0, -0.5]).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("{split}-{i}")).collect();
        let table = EmbeddingTable::new(Matrix::from_rows(&rows).unwrap(), ids.clone()).unwrap();
        let recs = ids
            .iter()
            .map(|id| ObservationRecord::new(id.clone(), Some("only"), split))
            .collect();
        Dataset::new(table, None, recs).unwrap()
    };
    let train_set = make(12, Split::Train, 0.0);
    let labels = build_label_space(&train_set.records).unwrap();
    (train_set, make(4, Split::Val, 0.5), labels)
}

pub fn early_stopping() -> Outcome {
    let (train_set, val, labels) = constant_validation();
    let inputs = TrainInputs {
        train: &train_set,
        val: &val,
        labels: &labels,
    };
    let mut seen = Vec::new();
    for patience in [1, 2, 3, 5, 8] {
        let config = TrainConfig {
            early_stop_patience: patience,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let out = train(&inputs, &config).map_err(|e| e.to_string())?;
        ensure(out.log.epochs() == 1 + patience, || {
            format!("patience {patience} ran {} epochs", out.log.epochs())
        })?;
        ensure(out.best_epoch == 1, || {
            format!("patience {patience} kept epoch {}", out.best_epoch)
        })?;
        let first = train(
            &inputs,
            &TrainConfig {
                max_epochs: 1,
                ..config
            },
        )
        .map_err(|e| e.to_string())?;
        ensure(out.model == first.model, || {
            format!("patience {patience} did not return the epoch-1 parameters")
        })?;
        seen.push(out.log.epochs());
    }
    Ok(format!(
        "patience 1,2,3,5,8 stopped after {seen:?} epochs, epoch-1 parameters returned"
    ))
}
