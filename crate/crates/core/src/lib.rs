//! Uncertainty-aware ensemble classification for heavily imbalanced
//! binary datasets, with an audio front end for respiratory-sound
//! screening tasks.
//!
//! The crate is organised as a pipeline:
//!
//! ```text
//! audio clips ──> [audio]    fused feature vectors
//!                               │
//! feature CSV ──> [dataset]  user-disjoint train/validation/test splits
//!                               │
//!                 [resampling]  balanced bags, down-sampling, SMOTE
//!                               │
//!                 [classifier]  per-bag probabilistic units
//!                               │
//!                 [ensemble]    probability fusion + disagreement score
//!                               │
//!                 [metrics]     ROC-AUC, sensitivity/specificity,
//!                               referral curves
//! ```
//!
//! Every randomized stage takes an explicit seed and is deterministic:
//! the same inputs and seeds produce byte-identical artifacts on every
//! platform.

pub mod audio;
pub mod classifier;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod resampling;
pub mod seed;

pub use audio::{AudioClip, MelSegmentGrid, Modality, ModalityEmbedding};
pub use classifier::{ClassifierKind, ClassifierSpec, EpochStats, TrainConfig, TrainedUnit};
pub use dataset::{DataSplit, Dataset, Label, Sample, SplitSpec, SyntheticConfig};
pub use ensemble::{Decision, EnsembleSuite, Prediction, ReferralPolicy};
pub use error::{
    AudioError, DataError, EnsembleError, MetricsError, PersistError, ResampleError, TrainError,
};
pub use metrics::{ConfusionCounts, EvaluationReport, ReferralCurve, RocCurve};
pub use resampling::{BagPlan, TrainingBag};
