//! Run configuration: a versioned TOML file with one table per stage.
//! Every key is optional; command-line flags override file values.

use std::path::Path;

use serde::Deserialize;

use segwords::classifier::{TrainConfig, ValidationMetric};
use segwords::eval::Aggregation;
use segwords::labeling::{AugmentConfig, InsideRule};
use segwords::postprocess::{SelectionStrategy, TimeConvention};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub labeling: LabelingSection,
    pub postprocess: PostprocessSection,
    pub eval: EvalSection,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            labeling: LabelingSection::default(),
            postprocess: PostprocessSection::default(),
            eval: EvalSection::default(),
            train: TrainSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelingSection {
    pub frame_ms: f64,
    pub aug_radius: usize,
    pub inside_rule: InsideRuleName,
    pub sample_rate: u32,
}

impl Default for LabelingSection {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            aug_radius: 1,
            inside_rule: InsideRuleName::Majority,
            sample_rate: 16_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InsideRuleName {
    Majority,
    Any,
}

impl From<InsideRuleName> for InsideRule {
    fn from(v: InsideRuleName) -> Self {
        match v {
            InsideRuleName::Majority => InsideRule::Majority,
            InsideRuleName::Any => InsideRule::Any,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostprocessSection {
    pub selection: SelectionName,
    pub time_convention: TimeConventionName,
}

impl Default for PostprocessSection {
    fn default() -> Self {
        Self {
            selection: SelectionName::Mid,
            time_convention: TimeConventionName::Center,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SelectionName {
    First,
    Mid,
    Last,
}

impl From<SelectionName> for SelectionStrategy {
    fn from(v: SelectionName) -> Self {
        match v {
            SelectionName::First => SelectionStrategy::First,
            SelectionName::Mid => SelectionStrategy::Mid,
            SelectionName::Last => SelectionStrategy::Last,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TimeConventionName {
    Center,
    Onset,
}

impl From<TimeConventionName> for TimeConvention {
    fn from(v: TimeConventionName) -> Self {
        match v {
            TimeConventionName::Center => TimeConvention::Center,
            TimeConventionName::Onset => TimeConvention::Onset,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub tolerance_ms: f64,
    pub aggregation: AggregationName,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            tolerance_ms: 40.0,
            aggregation: AggregationName::Micro,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AggregationName {
    Micro,
    Macro,
}

impl From<AggregationName> for Aggregation {
    fn from(v: AggregationName) -> Self {
        match v {
            AggregationName::Micro => Aggregation::Micro,
            AggregationName::Macro => Aggregation::Macro,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub validation: ValidationName,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            patience: d.patience,
            max_epochs: d.max_epochs,
            seed: d.seed,
            validation: ValidationName::ExactFrameR,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ValidationName {
    ExactFrameR,
    FrameAccuracy,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::input(format!(
                "config {}: unsupported version {} (expected {CONFIG_VERSION})",
                path.display(),
                cfg.version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.labeling.frame_ms > 0.0) {
            return Err(CliError::input("frame_ms must be positive"));
        }
        if !(self.eval.tolerance_ms >= 0.0) {
            return Err(CliError::input("tolerance_ms must be non-negative"));
        }
        self.train_config().validate()?;
        Ok(())
    }

    pub fn tolerance_s(&self) -> f64 {
        self.eval.tolerance_ms / 1000.0
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            patience: self.train.patience,
            max_epochs: self.train.max_epochs,
            seed: self.train.seed,
            augment: AugmentConfig {
                radius: self.labeling.aug_radius,
            },
            selection: self.postprocess.selection.into(),
            validation: match self.train.validation {
                ValidationName::ExactFrameR => ValidationMetric::ExactFrameR,
                ValidationName::FrameAccuracy => ValidationMetric::FrameAccuracy,
            },
        }
    }
}
