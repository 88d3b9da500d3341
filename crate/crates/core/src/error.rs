//! Error types for every stage of the pipeline.
//!
//! Each subsystem has its own enum so that callers can match on the
//! failures they can actually handle; the CLI maps them onto exit
//! codes. None of the variants are ever produced for recoverable
//! conditions that the operations are specified to absorb (class ties,
//! empty histogram bins, undefined metric entries and so on).

use std::path::PathBuf;

use thiserror::Error;

use crate::audio::Modality;

/// Failures while loading, validating, splitting or generating datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("dataset has no samples")]
    Empty,
    #[error("sample {id}: expected {expected} feature columns, found {found}")]
    InconsistentFeatureDim {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("user {user} appears with both labels")]
    ConflictingUserLabels { user: String },
    #[error("duplicate sample id {id}")]
    DuplicateSampleId { id: String },
    #[error("sample {id} has a non-finite feature value")]
    NonFiniteFeature { id: String },
    #[error("invalid split spec: {0}")]
    InvalidSplitSpec(String),
    #[error("not enough users to split: {0}")]
    InsufficientUsers(String),
    #[error("invalid synthetic config: {0}")]
    InvalidSyntheticConfig(String),
}

/// Failures while balancing a training partition.
#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("training partition has no positive users")]
    NoPositiveUsers,
    #[error("cannot match {positive} positive users: only {healthy} healthy users available")]
    InsufficientHealthyUsers { positive: usize, healthy: usize },
    #[error("interpolation needs at least {needed} positive samples, found {found}")]
    TooFewPositiveSamples { needed: usize, found: usize },
    #[error("invalid bag plan: {0}")]
    InvalidPlan(String),
}

/// Failures in the audio front end.
#[derive(Debug, Error)]
pub enum AudioError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    UnsupportedWav { path: PathBuf, message: String },
    #[error("clip is empty")]
    EmptyClip,
    #[error("clip is silent: no window reaches the energy floor")]
    AllSilent,
    #[error("clip is {seconds:.3} s after trimming; at least {minimum:.2} s required")]
    TooShort { seconds: f64, minimum: f64 },
    #[error("clip yields no complete segment ({frames} frames, {needed} needed)")]
    NoCompleteSegments { frames: usize, needed: usize },
    #[error("clip has sample rate {sample_rate} Hz; preprocess it to 16000 Hz first")]
    NotPreprocessed { sample_rate: u32 },
    #[error("missing {0} recording")]
    MissingModality(Modality),
    #[error("invalid mel grid: {0}")]
    InvalidGrid(String),
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
}

/// Failures while training or applying a single classifier.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("feature vector has {found} entries, classifier expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("loss became non-finite in epoch {epoch}: training diverged")]
    Diverged { epoch: usize },
    #[error("invalid classifier spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// Failures while saving or loading trained models.
#[derive(Debug, Error)]
pub enum PersistError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// Failures at the ensemble level.
#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Bagging(#[from] ResampleError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("probability list is empty")]
    EmptyProbabilities,
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("suite has no units")]
    EmptySuite,
    #[error("invalid referral policy: {0}")]
    InvalidPolicy(String),
}

/// Failures while computing evaluation metrics.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("metric input is empty")]
    EmptyInput,
    #[error("{metric} needs both classes present")]
    SingleClass { metric: &'static str },
    #[error("{metric} is undefined: zero denominator")]
    ZeroDenominator { metric: &'static str },
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
    #[error("retention fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("bin width {0} is outside (0, 0.5]")]
    InvalidBinWidth(f64),
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
}
