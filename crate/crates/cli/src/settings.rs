//! Config file loading and flag > file > preset > default resolution.

use std::path::{Path, PathBuf};

use longtail::augment::MixupConfig;
use longtail::model::Objective;
use longtail::optim::{Preset, TrainConfig};
use longtail::zeroshot::ProtocolConfig;
use longtail::Error;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::args::{DataArgs, TrainFlags, ZeroshotArgs};
use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    #[serde(default)]
    pub train: Map<String, Value>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub zeroshot: Map<String, Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub images: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub text: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())).into())
    }

    /// Data paths from flags, falling back to the file.
    pub fn data(&self, flags: &DataArgs) -> DataArgs {
        DataArgs {
            images: flags.images.clone().or_else(|| self.data.images.clone()),
            metadata: flags
                .metadata
                .clone()
                .or_else(|| self.data.metadata.clone()),
            text: flags.text.clone().or_else(|| self.data.text.clone()),
        }
    }
}

pub fn parse_preset(name: &str) -> Result<Preset, CliError> {
    name.parse::<Preset>().map_err(CliError::Core)
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: &Map<String, Value>) -> Result<(), Error> {
    let Value::Object(obj) = base else {
        unreachable!("configs serialize to objects")
    };
    for (k, v) in patch {
        match (obj.get_mut(k), v) {
            (None, _) => return Err(Error::InvalidConfig(format!("unknown config key {k:?}"))),
            (Some(slot @ Value::Object(_)), Value::Object(p)) => merge(slot, p)?,
            (Some(slot), _) => *slot = v.clone(),
        }
    }
    Ok(())
}

fn overlay<T: serde::Serialize + serde::de::DeserializeOwned>(
    base: T,
    patch: &Map<String, Value>,
) -> Result<T, Error> {
    let mut value = serde_json::to_value(base)?;
    merge(&mut value, patch)?;
    serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// The preset (flag, else file) overlaid with the file's `train` section,
/// then with explicit flags and `--seed`.
pub fn train_config(
    file: &ConfigFile,
    flags: &TrainFlags,
    seed: Option<u64>,
) -> Result<TrainConfig, CliError> {
    let base = match flags.preset.as_deref().or(file.preset.as_deref()) {
        Some(name) => parse_preset(name)?.config(),
        None => TrainConfig::default(),
    };
    let mut c = overlay(base, &file.train)?;
    apply_common(
        &mut c,
        flags.epochs,
        flags.batch_size,
        flags.patience,
        flags.lr,
        seed,
    );
    if let Some(a) = flags.alpha {
        c.mixup = MixupConfig::with_alpha(a);
    }
    if flags.no_mixup {
        c.mixup = MixupConfig::DISABLED;
    }
    if flags.weighted {
        c.weighted_sampling = true;
    }
    if let Some(objs) = &flags.objectives {
        c.objectives = objs
            .iter()
            .map(|o| {
                Objective::parse(o.trim())
                    .ok_or_else(|| CliError::Usage(format!("unknown objective {o:?}")))
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(g) = flags.gamma {
        c.gradnorm_gamma = g;
    }
    c.validate()?;
    Ok(c)
}

pub fn apply_common(
    c: &mut TrainConfig,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    patience: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
) {
    if let Some(v) = epochs {
        c.max_epochs = v;
    }
    if let Some(v) = batch_size {
        c.batch_size = v;
    }
    if let Some(v) = patience {
        c.early_stop_patience = v;
    }
    if let Some(v) = lr {
        c.lr = v;
    }
    if let Some(v) = seed {
        c.seed = v;
    }
}

pub fn protocol_config(file: &ConfigFile, a: &ZeroshotArgs) -> Result<ProtocolConfig, CliError> {
    let mut c = overlay(ProtocolConfig::default(), &file.zeroshot)?;
    if let Some(v) = &a.model {
        c.model = v.clone();
    }
    if let Some(v) = a.temperature {
        c.temperature = v;
    }
    if let Some(v) = a.top_k {
        c.top_k = v;
    }
    if let Some(v) = a.min_confidence {
        c.min_confidence = v;
    }
    if let Some(v) = a.max_retries {
        c.max_retries = v;
    }
    if let Some(v) = a.runs {
        c.runs = v;
    }
    if let Some(v) = a.concurrency {
        c.concurrency = v;
    }
    c.validate()?;
    Ok(c)
}
