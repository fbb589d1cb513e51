use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{per_class_topk, topk_accuracy, ClassAccuracy};
use crate::augment::MixupConfig;
use crate::dataio::{Dataset, LabelSpace};
use crate::optim::{labeled_predictions, train, TrainConfig, TrainInputs, TrainLog};
use crate::{Error, Result};

/// Train/validation data, an optional held-out test split, and labels.
#[derive(Debug, Clone, Copy)]
pub struct DataBundle<'a> {
    pub train: &'a Dataset,
    pub val: &'a Dataset,
    pub test: Option<&'a Dataset>,
    pub labels: &'a LabelSpace,
}

impl<'a> DataBundle<'a> {
    fn inputs(&self) -> TrainInputs<'a> {
        TrainInputs {
            train: self.train,
            val: self.val,
            labels: self.labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub run: String,
    pub config_digest: String,
    pub alpha: Option<f64>,
    pub weighted: bool,
    pub objectives: String,
    pub val_top1: f64,
    pub val_top5: f64,
    pub test_top5: Option<f64>,
    pub per_class: Vec<ClassAccuracy>,
    pub log: TrainLog,
}

/// Hex SHA-256 of the config's JSON form.
pub fn config_digest(config: &TrainConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn run_one(name: &str, config: &TrainConfig, data: &DataBundle<'_>) -> Result<AblationResult> {
    let out = train(&data.inputs(), config)?;
    let k = 5.min(data.labels.len());
    let val_preds = labeled_predictions(&out.model, data.val, data.labels)?;
    let val_top5 = topk_accuracy(&val_preds, k)?;
    let test_top5 = match data.test {
        Some(t) => match labeled_predictions(&out.model, t, data.labels) {
            Ok(p) => Some(topk_accuracy(&p, k)?),
            Err(Error::EmptyDataset) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(AblationResult {
        run: name.to_string(),
        config_digest: config_digest(config),
        alpha: config.mixup.enabled.then_some(config.mixup.alpha),
        weighted: config.weighted_sampling,
        objectives: config.objectives_label(),
        val_top1: topk_accuracy(&val_preds, 1)?,
        val_top5,
        test_top5,
        per_class: per_class_topk(&val_preds, k, data.labels)?,
        log: out.log,
    })
}

/// One training run per named config. Runs are independent and execute
/// concurrently; results come back in grid order. Failures carry the run
/// name.
pub fn run_ablation(
    grid: &[(String, TrainConfig)],
    data: &DataBundle<'_>,
) -> Result<Vec<AblationResult>> {
    for (name, c) in grid {
        c.validate().map_err(|e| tag(name, e))?;
    }
    let results: Vec<Result<AblationResult>> = if cfg!(target_arch = "wasm32") || grid.len() < 2 {
        grid.iter().map(|(n, c)| run_one(n, c, data)).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = grid
                .iter()
                .map(|(n, c)| s.spawn(move || run_one(n, c, data)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training thread panicked"))
                .collect()
        })
    };
    results
        .into_iter()
        .zip(grid)
        .map(|(r, (name, _))| r.map_err(|e| tag(name, e)))
        .collect()
}

fn tag(run: &str, e: Error) -> Error {
    Error::Run {
        run: run.to_string(),
        source: Box::new(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub val_top1: f64,
    pub val_top5: f64,
}

/// `0.10, 0.15, …, 2.00`; contains 1.20 and 1.45 exactly.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=38).map(|i| f64::from(10 + 5 * i) / 100.0).collect()
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_alpha_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("cannot parse alpha grid {text:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            // rounded to 1e-9 so decimal grids come out exact
            (0..=n)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect()
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() {
        return Err(bad());
    }
    Ok(grid)
}

/// One run per α with otherwise identical config, seed and data.
pub fn sweep_alpha(
    alphas: &[f64],
    base: &TrainConfig,
    data: &DataBundle<'_>,
) -> Result<Vec<AlphaPoint>> {
    if let Some(&a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::NonPositiveAlpha(a));
    }
    let grid: Vec<(String, TrainConfig)> = alphas
        .iter()
        .map(|&alpha| {
            let config = TrainConfig {
                mixup: MixupConfig::with_alpha(alpha),
                ..base.clone()
            };
            (format!("alpha={alpha}"), config)
        })
        .collect();
    Ok(alphas
        .iter()
        .zip(run_ablation(&grid, data)?)
        .map(|(&alpha, r)| AlphaPoint {
            alpha,
            val_top1: r.val_top1,
            val_top5: r.val_top5,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_published_optima() {
        let g = default_alpha_grid();
        assert_eq!(g.first(), Some(&0.1));
        assert_eq!(g.last(), Some(&2.0));
        assert!(g.contains(&1.2));
        assert!(g.contains(&1.45));
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_alpha_grid("0.5,1.0").unwrap(), vec![0.5, 1.0]);
        assert_eq!(
            parse_alpha_grid("0.1:2.0:0.05").unwrap(),
            default_alpha_grid()
        );
        assert!(parse_alpha_grid("1:0:0.1").is_err());
        assert!(parse_alpha_grid("a,b").is_err());
    }

    #[test]
    fn digest_is_stable_hex() {
        let d = config_digest(&TrainConfig::default());
        assert_eq!(d.len(), 64);
        assert_eq!(d, config_digest(&TrainConfig::default()));
        assert_ne!(
            d,
            config_digest(&TrainConfig {
                seed: 1,
                ..TrainConfig::default()
            })
        );
    }
}
