//! Experiment configuration: a TOML file mirrored by CLI flags.
//!
//! Precedence is defaults < file < flags. The fully resolved config is
//! re-serialized into every run directory (`config.effective.toml`) and
//! its SHA-256 identifies the run in the manifest, so two runs with the
//! same hash were configured identically.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use balsa::classifier::DEFAULT_HIDDEN_UNITS;
use balsa::resampling::DEFAULT_BAG_COUNT;
use balsa::{BagPlan, ClassifierKind, ClassifierSpec, ReferralPolicy, SplitSpec, TrainConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runs::sha256_hex;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// How the training set is balanced before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// One classifier on the raw imbalanced training set.
    SingleImbalanced,
    /// One classifier on a majority-down-sampled training set.
    DownSample,
    /// One classifier on a minority-oversampled training set.
    Smote,
    /// Balanced-bag ensemble with uncertainty estimates.
    Ensemble,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SingleImbalanced => "single_imbalanced",
            Strategy::DownSample => "down_sample",
            Strategy::Smote => "smote",
            Strategy::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single_imbalanced" => Ok(Strategy::SingleImbalanced),
            "down_sample" => Ok(Strategy::DownSample),
            "smote" => Ok(Strategy::Smote),
            "ensemble" => Ok(Strategy::Ensemble),
            other => Err(format!(
                "unknown strategy {other:?}; expected one of \
                 single_imbalanced, down_sample, smote, ensemble"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKindConfig {
    MlpHead,
    Logistic,
}

impl fmt::Display for ClassifierKindConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKindConfig::MlpHead => "mlp_head",
            ClassifierKindConfig::Logistic => "logistic",
        })
    }
}

impl FromStr for ClassifierKindConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlp_head" => Ok(ClassifierKindConfig::MlpHead),
            "logistic" => Ok(ClassifierKindConfig::Logistic),
            other => Err(format!(
                "unknown classifier {other:?}; expected mlp_head or logistic"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            validation_fraction: 0.1,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BagsSection {
    pub n_bags: usize,
}

impl Default for BagsSection {
    fn default() -> Self {
        BagsSection {
            n_bags: DEFAULT_BAG_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub kind: ClassifierKindConfig,
    /// Hidden width; `None` picks the kind's default (64 for the MLP
    /// head, 0 for logistic).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_units: Option<usize>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            kind: ClassifierKindConfig::MlpHead,
            hidden_units: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        TrainingSection {
            learning_rate: base.learning_rate,
            lr_decay: base.lr_decay,
            batch_size: base.batch_size,
            max_epochs: base.max_epochs,
            patience: base.patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferralSection {
    pub sigma_threshold: f64,
    pub escalation: Vec<String>,
}

impl Default for ReferralSection {
    fn default() -> Self {
        let base = ReferralPolicy::default();
        ReferralSection {
            sigma_threshold: base.sigma_threshold,
            escalation: base.escalation,
        }
    }
}

/// Everything the `experiment` subcommand needs, resolvable from a
/// TOML file, CLI flags, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Feature table used for training and evaluation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Parent directory that receives numbered run directories.
    pub output_dir: PathBuf,
    pub strategy: Strategy,
    /// Independent repetitions of the full train/evaluate cycle.
    pub n_repeats: usize,
    pub seed: u64,
    /// Reuse the base seed's split in every repeat instead of
    /// resplitting with each repeat's own seed.
    pub freeze_split: bool,
    /// Also render SVG charts next to the CSV tables.
    pub emit_plots: bool,
    pub split: SplitSection,
    pub bags: BagsSection,
    pub classifier: ClassifierSection,
    pub training: TrainingSection,
    pub referral: ReferralSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            output_dir: PathBuf::from("runs"),
            strategy: Strategy::Ensemble,
            n_repeats: 10,
            seed: 7,
            freeze_split: false,
            emit_plots: false,
            split: SplitSection::default(),
            bags: BagsSection::default(),
            classifier: ClassifierSection::default(),
            training: TrainingSection::default(),
            referral: ReferralSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    /// Structural checks that do not need the dataset. Anything caught
    /// here is a config error, not a data or training error.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n_repeats == 0 {
            return fail("n_repeats must be at least 1".into());
        }
        let v = self.split.validation_fraction;
        let t = self.split.test_fraction;
        if !(v.is_finite() && t.is_finite() && v > 0.0 && t > 0.0 && v + t < 1.0) {
            return fail(format!(
                "split fractions must be positive and sum below 1, got \
                 validation {v} and test {t}"
            ));
        }
        if self.bags.n_bags == 0 {
            return fail("bags.n_bags must be at least 1".into());
        }
        if let Some(h) = self.classifier.hidden_units {
            match self.classifier.kind {
                ClassifierKindConfig::Logistic if h != 0 => {
                    return fail(format!(
                        "logistic classifier takes no hidden units, got {h}"
                    ));
                }
                ClassifierKindConfig::MlpHead if h == 0 => {
                    return fail("mlp_head needs at least 1 hidden unit".into());
                }
                _ => {}
            }
        }
        let tr = &self.training;
        if !(tr.learning_rate.is_finite() && tr.learning_rate > 0.0) {
            return fail(format!(
                "learning_rate must be positive, got {}",
                tr.learning_rate
            ));
        }
        if !(tr.lr_decay.is_finite() && tr.lr_decay > 0.0 && tr.lr_decay <= 1.0) {
            return fail(format!("lr_decay must be in (0, 1], got {}", tr.lr_decay));
        }
        if tr.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if tr.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        let sigma = self.referral.sigma_threshold;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return fail(format!(
                "sigma_threshold must be finite and nonnegative, got {sigma}"
            ));
        }
        Ok(())
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            validation_fraction: self.split.validation_fraction,
            test_fraction: self.split.test_fraction,
            seed,
        }
    }

    pub fn bag_plan(&self, seed: u64) -> BagPlan {
        BagPlan {
            n_bags: self.bags.n_bags,
            seed,
        }
    }

    pub fn classifier_spec(&self, input_dim: usize) -> ClassifierSpec {
        match self.classifier.kind {
            ClassifierKindConfig::MlpHead => ClassifierSpec {
                kind: ClassifierKind::MlpHead,
                input_dim,
                hidden_units: self.classifier.hidden_units.unwrap_or(DEFAULT_HIDDEN_UNITS),
            },
            ClassifierKindConfig::Logistic => ClassifierSpec::logistic(input_dim),
        }
    }

    /// Training hyperparameters; the seed is a placeholder that every
    /// caller replaces with a per-unit derivation.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.training.learning_rate,
            lr_decay: self.training.lr_decay,
            batch_size: self.training.batch_size,
            max_epochs: self.training.max_epochs,
            patience: self.training.patience,
            seed: 0,
        }
    }

    pub fn policy(&self) -> ReferralPolicy {
        ReferralPolicy {
            sigma_threshold: self.referral.sigma_threshold,
            escalation: self.referral.escalation.clone(),
        }
    }

    /// The fully resolved config as TOML, byte-stable for hashing.
    pub fn effective_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    pub fn sha256(&self) -> String {
        sha256_hex(self.effective_toml().as_bytes())
    }
}
