//! One error type for the whole binary, with a stable exit-code map:
//! 2 for configuration mistakes, 3 for data problems, 4 for training
//! failures, 1 for anything else. Usage errors caught by the argument
//! parser also exit with 2.

use std::path::PathBuf;

use balsa::{
    AudioError, DataError, EnsembleError, MetricsError, PersistError, ResampleError, TrainError,
};
use thiserror::Error;

use crate::config::ConfigError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_TRAIN: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("{failed} of {total} clips failed preprocessing; see {}", log.display())]
    PreprocessFailures {
        failed: usize,
        total: usize,
        log: PathBuf,
    },
}

/// Splits training errors into the three buckets: bad hyperparameters
/// are config mistakes, shape and emptiness problems are data issues,
/// divergence is a genuine training failure.
fn train_exit_code(err: &TrainError) -> i32 {
    match err {
        TrainError::InvalidSpec(_) | TrainError::InvalidConfig(_) => EXIT_USAGE,
        TrainError::DimensionMismatch { .. }
        | TrainError::EmptyTrainingSet
        | TrainError::EmptyValidation => EXIT_DATA,
        TrainError::Diverged { .. } => EXIT_TRAIN,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Data(err) => match err {
                DataError::InvalidSplitSpec(_) | DataError::InvalidSyntheticConfig(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            },
            CliError::Audio(_) => EXIT_DATA,
            CliError::Resample(ResampleError::InvalidPlan(_)) => EXIT_USAGE,
            CliError::Resample(_) => EXIT_DATA,
            CliError::Train(err) => train_exit_code(err),
            CliError::Ensemble(err) => match err {
                EnsembleError::Bagging(ResampleError::InvalidPlan(_)) => EXIT_USAGE,
                EnsembleError::Bagging(_) => EXIT_DATA,
                EnsembleError::Train(inner) => train_exit_code(inner),
                EnsembleError::InvalidPolicy(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            },
            CliError::Metrics(_) => EXIT_DATA,
            CliError::Persist(_) => EXIT_DATA,
            CliError::Io { .. } => 1,
            CliError::PreprocessFailures { .. } => EXIT_DATA,
        }
    }
}

/// Wraps an io::Error with the operation that failed.
pub fn io_context(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_separate_error_families() {
        let config = CliError::Config(ConfigError::Invalid("bad".into()));
        assert_eq!(config.exit_code(), EXIT_USAGE);

        let data = CliError::Data(DataError::Empty);
        assert_eq!(data.exit_code(), EXIT_DATA);

        let diverged = CliError::Train(TrainError::Diverged { epoch: 3 });
        assert_eq!(diverged.exit_code(), EXIT_TRAIN);

        let nested = CliError::Ensemble(EnsembleError::Train(TrainError::Diverged { epoch: 1 }));
        assert_eq!(nested.exit_code(), EXIT_TRAIN);

        let shape = CliError::Train(TrainError::DimensionMismatch {
            expected: 4,
            found: 5,
        });
        assert_eq!(shape.exit_code(), EXIT_DATA);

        let bad_spec = CliError::Train(TrainError::InvalidSpec("h".into()));
        assert_eq!(bad_spec.exit_code(), EXIT_USAGE);
    }
}
