use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::MixupConfig;
use crate::model::Objective;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub lr: f64,
    pub seed: u64,
    pub mixup: MixupConfig,
    pub weighted_sampling: bool,
    pub objectives: Vec<Objective>,
    /// Train the image+text fusion head instead of the linear head.
    pub use_text: bool,
    pub gradnorm_gamma: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            max_epochs: 50,
            early_stop_patience: 3,
            lr: 5e-4,
            seed: 0,
            mixup: MixupConfig::DISABLED,
            weighted_sampling: false,
            objectives: vec![Objective::Category],
            use_text: false,
            gradnorm_gamma: 1.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.early_stop_patience == 0 {
            return bad("early_stop_patience must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !self.gradnorm_gamma.is_finite() || self.gradnorm_gamma < 0.0 {
            return bad(format!(
                "gradnorm_gamma must be nonnegative, got {}",
                self.gradnorm_gamma
            ));
        }
        if !self.objectives.contains(&Objective::Category) {
            return bad("objectives must include category".into());
        }
        let mut seen = self.objectives.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.objectives.len() {
            return bad("objectives contain duplicates".into());
        }
        if self.use_text && self.is_multi_task() {
            return bad("text fusion and multi-objective training cannot be combined".into());
        }
        self.mixup.validate()
    }

    pub fn is_multi_task(&self) -> bool {
        self.objectives != [Objective::Category]
    }

    /// Objectives rendered as `a+b+c`.
    pub fn objectives_label(&self) -> String {
        self.objectives
            .iter()
            .map(|o| o.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// Named configurations, one per ablation row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Baseline,
    Weighted,
    Mixup,
    MixupWeighted,
    CompetitionMixup,
    CompetitionMixupWeighted,
    PostComp,
    Fusion,
    Gradnorm,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Baseline,
        Preset::Weighted,
        Preset::Mixup,
        Preset::MixupWeighted,
        Preset::CompetitionMixup,
        Preset::CompetitionMixupWeighted,
        Preset::PostComp,
        Preset::Fusion,
        Preset::Gradnorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Baseline => "baseline",
            Preset::Weighted => "weighted",
            Preset::Mixup => "mixup",
            Preset::MixupWeighted => "mixup-weighted",
            Preset::CompetitionMixup => "competition-mixup",
            Preset::CompetitionMixupWeighted => "competition-mixup-weighted",
            Preset::PostComp => "post-comp",
            Preset::Fusion => "fusion",
            Preset::Gradnorm => "gradnorm",
        }
    }

    /// The preset applied on top of the defaults.
    pub fn config(self) -> TrainConfig {
        let mut c = TrainConfig::default();
        match self {
            Preset::Baseline => {}
            Preset::Weighted => c.weighted_sampling = true,
            Preset::Mixup => c.mixup = MixupConfig::with_alpha(1.20),
            Preset::MixupWeighted => {
                c.mixup = MixupConfig::with_alpha(1.20);
                c.weighted_sampling = true;
            }
            Preset::CompetitionMixup => {
                c.mixup = MixupConfig::with_alpha(2.0);
                c.max_epochs = 10;
            }
            Preset::CompetitionMixupWeighted => {
                c.mixup = MixupConfig::with_alpha(2.0);
                c.weighted_sampling = true;
            }
            Preset::PostComp => c.mixup = MixupConfig::with_alpha(1.45),
            Preset::Fusion => c.use_text = true,
            Preset::Gradnorm => {
                c.weighted_sampling = true;
                c.objectives = Objective::ALL.to_vec();
            }
        }
        c
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset {s:?}")))
    }
}
