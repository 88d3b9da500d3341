//! Data model and dataset handling.
//!
//! A [`Sample`] is one labelled feature vector together with the id of
//! the user it was collected from. User provenance matters: the same
//! person may contribute several samples, so every resampling and
//! splitting decision in this crate operates on whole users, never on
//! individual samples. Mixing one user's samples across partitions
//! would leak person-specific signal from train to test and inflate
//! every downstream metric.
//!
//! Construction of a [`Dataset`] validates the invariants the rest of
//! the pipeline relies on: a consistent feature dimension, finite
//! feature values, unique sample ids and a single label per user.
//!
//! Tabular files are CSV with a header. The canonical column layout is
//!
//! ```text
//! id,user_id,label,f0,f1,...,f{D-1}
//! ```
//!
//! with `label` either `0` (healthy) or `1` (positive). Column names
//! can be remapped through [`TabularSchema`] when ingesting foreign
//! files; [`save_tabular`] always writes the canonical layout.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Binary class label. `Healthy` is the majority class in the intended
/// screening datasets; `Positive` the minority class of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Healthy,
    Positive,
}

impl Label {
    /// Parses the integer encoding used in tabular files.
    pub fn from_int(value: i64) -> Option<Label> {
        match value {
            0 => Some(Label::Healthy),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    /// Integer encoding used in tabular files: healthy 0, positive 1.
    pub fn as_int(self) -> u8 {
        match self {
            Label::Healthy => 0,
            Label::Positive => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Healthy => write!(f, "healthy"),
            Label::Positive => write!(f, "positive"),
        }
    }
}

/// One labelled observation from one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub user_id: String,
    pub features: Vec<f64>,
    pub label: Label,
}

/// Per-class counts, either of samples or of users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub positive: usize,
    pub healthy: usize,
}

/// A validated, non-empty collection of samples with a uniform feature
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: usize,
}

impl Dataset {
    /// Builds a dataset, checking every invariant: at least one sample,
    /// a single feature dimension, finite values, unique sample ids and
    /// one label per user. The first violation in sample order is
    /// reported.
    pub fn from_samples(samples: Vec<Sample>) -> Result<Dataset, DataError> {
        if samples.is_empty() {
            return Err(DataError::Empty);
        }
        let feature_dim = samples[0].features.len();
        {
            let mut ids: HashSet<&str> = HashSet::with_capacity(samples.len());
            let mut user_labels: HashMap<&str, Label> = HashMap::new();
            for sample in &samples {
                if sample.features.len() != feature_dim {
                    return Err(DataError::InconsistentFeatureDim {
                        id: sample.id.clone(),
                        expected: feature_dim,
                        found: sample.features.len(),
                    });
                }
                if !sample.features.iter().all(|v| v.is_finite()) {
                    return Err(DataError::NonFiniteFeature {
                        id: sample.id.clone(),
                    });
                }
                if !ids.insert(&sample.id) {
                    return Err(DataError::DuplicateSampleId {
                        id: sample.id.clone(),
                    });
                }
                match user_labels.get(sample.user_id.as_str()) {
                    Some(&label) if label != sample.label => {
                        return Err(DataError::ConflictingUserLabels {
                            user: sample.user_id.clone(),
                        });
                    }
                    Some(_) => {}
                    None => {
                        user_labels.insert(&sample.user_id, sample.label);
                    }
                }
            }
        }
        Ok(Dataset {
            samples,
            feature_dim,
        })
    }

    /// Builds a dataset from samples already known to satisfy the
    /// invariants (subsets of a validated dataset).
    pub(crate) fn from_validated(samples: Vec<Sample>, feature_dim: usize) -> Dataset {
        debug_assert!(!samples.is_empty());
        Dataset {
            samples,
            feature_dim,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        // Construction rejects empty datasets, so this is always false.
        self.samples.is_empty()
    }

    /// Unique user ids in order of first appearance.
    pub fn users(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for sample in &self.samples {
            if seen.insert(sample.user_id.as_str()) {
                out.push(sample.user_id.as_str());
            }
        }
        out
    }

    /// Unique user ids carrying `label`, in order of first appearance.
    pub fn users_with_label(&self, label: Label) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for sample in &self.samples {
            if sample.label == label && seen.insert(sample.user_id.as_str()) {
                out.push(sample.user_id.as_str());
            }
        }
        out
    }

    pub fn positive_users(&self) -> Vec<&str> {
        self.users_with_label(Label::Positive)
    }

    pub fn healthy_users(&self) -> Vec<&str> {
        self.users_with_label(Label::Healthy)
    }

    /// The label shared by all samples of `user`, if the user exists.
    pub fn user_label(&self, user: &str) -> Option<Label> {
        self.samples
            .iter()
            .find(|s| s.user_id == user)
            .map(|s| s.label)
    }

    /// All samples belonging to the given users, in dataset order.
    pub fn subset_by_users(&self, users: &HashSet<&str>) -> Result<Dataset, DataError> {
        let samples: Vec<Sample> = self
            .samples
            .iter()
            .filter(|s| users.contains(s.user_id.as_str()))
            .cloned()
            .collect();
        if samples.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Dataset::from_validated(samples, self.feature_dim))
    }

    pub fn class_sample_counts(&self) -> ClassCounts {
        let positive = self
            .samples
            .iter()
            .filter(|s| s.label.is_positive())
            .count();
        ClassCounts {
            positive,
            healthy: self.samples.len() - positive,
        }
    }

    pub fn class_user_counts(&self) -> ClassCounts {
        ClassCounts {
            positive: self.positive_users().len(),
            healthy: self.healthy_users().len(),
        }
    }
}

/// Column names for ingesting a tabular feature file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabularSchema {
    pub id: String,
    pub user: String,
    pub label: String,
    /// Feature columns are the columns named `{prefix}0`, `{prefix}1`,
    /// ... in file order.
    pub feature_prefix: String,
}

impl Default for TabularSchema {
    fn default() -> Self {
        TabularSchema {
            id: "id".into(),
            user: "user_id".into(),
            label: "label".into(),
            feature_prefix: "f".into(),
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path, err: csv::Error) -> DataError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    if err.is_io_error() {
        if let csv::ErrorKind::Io(source) = err.into_kind() {
            return io_error(path, source);
        }
        unreachable!("is_io_error guarantees an Io kind");
    }
    DataError::Malformed {
        line,
        message: err.to_string(),
    }
}

fn required_column(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DataError::Malformed {
            line: 1,
            message: format!("missing required column {name:?}"),
        })
}

/// Loads a tabular feature file.
///
/// Rows must agree on the number of feature columns, labels must be
/// `0` or `1`, and the resulting dataset must satisfy every [`Dataset`]
/// invariant. Columns other than the schema's are ignored.
pub fn load_tabular(path: &Path, schema: &TabularSchema) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();

    let id_idx = required_column(&headers, &schema.id)?;
    let user_idx = required_column(&headers, &schema.user)?;
    let label_idx = required_column(&headers, &schema.label)?;
    let reserved = [id_idx, user_idx, label_idx];

    let feature_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(i, name)| !reserved.contains(i) && name.starts_with(&schema.feature_prefix))
        .map(|(i, _)| i)
        .collect();
    if feature_cols.is_empty() {
        return Err(DataError::Malformed {
            line: 1,
            message: format!("no feature columns with prefix {:?}", schema.feature_prefix),
        });
    }
    for (j, &col) in feature_cols.iter().enumerate() {
        let expected = format!("{}{}", schema.feature_prefix, j);
        if headers.get(col) != Some(expected.as_str()) {
            return Err(DataError::Malformed {
                line: 1,
                message: format!(
                    "feature columns must be named {}0..{}{} in order; found {:?}",
                    schema.feature_prefix,
                    schema.feature_prefix,
                    feature_cols.len() - 1,
                    headers.get(col).unwrap_or("")
                ),
            });
        }
    }

    let mut samples = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record.get(id_idx).unwrap_or("").to_string();
        let user_id = record.get(user_idx).unwrap_or("").to_string();
        if id.is_empty() || user_id.is_empty() {
            return Err(DataError::Malformed {
                line,
                message: "empty id or user id".into(),
            });
        }
        let label_text = record.get(label_idx).unwrap_or("");
        let label = label_text
            .parse::<i64>()
            .ok()
            .and_then(Label::from_int)
            .ok_or_else(|| DataError::Malformed {
                line,
                message: format!("label must be 0 or 1, found {label_text:?}"),
            })?;
        let mut features = Vec::with_capacity(feature_cols.len());
        for &col in &feature_cols {
            let text = record.get(col).unwrap_or("");
            let value = text.parse::<f64>().map_err(|_| DataError::Malformed {
                line,
                message: format!("feature value {text:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFiniteFeature { id: id.clone() });
            }
            features.push(value);
        }
        samples.push(Sample {
            id,
            user_id,
            features,
            label,
        });
    }
    Dataset::from_samples(samples)
}

/// Writes a dataset in the canonical column layout
/// `id,user_id,label,f0..f{D-1}`.
///
/// Feature values are written in shortest round-trip decimal form, so
/// saving and re-loading reproduces every value bit for bit and the
/// output bytes are a pure function of the dataset.
pub fn save_tabular(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["id".to_string(), "user_id".to_string(), "label".to_string()];
    for d in 0..data.feature_dim() {
        header.push(format!("f{d}"));
    }
    writer
        .write_record(&header)
        .map_err(|e| csv_error(path, e))?;
    for sample in data.samples() {
        let mut row = vec![
            sample.id.clone(),
            sample.user_id.clone(),
            sample.label.as_int().to_string(),
        ];
        for value in &sample.features {
            row.push(format!("{value}"));
        }
        writer.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}

/// One row of an audio manifest: a labelled submission with one
/// recording per modality. Paths are kept as written; callers resolve
/// relative paths against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub user_id: String,
    pub label: Label,
    pub breathing: PathBuf,
    pub cough: PathBuf,
    pub speech: PathBuf,
}

/// Loads an audio manifest: CSV with columns
/// `id,user_id,label,breathing,cough,speech`.
///
/// Ids must be unique and users single-labelled, exactly as in feature
/// datasets.
pub fn load_audio_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let id_idx = required_column(&headers, "id")?;
    let user_idx = required_column(&headers, "user_id")?;
    let label_idx = required_column(&headers, "label")?;
    let modality_idx = [
        required_column(&headers, "breathing")?,
        required_column(&headers, "cough")?,
        required_column(&headers, "speech")?,
    ];

    let mut entries = Vec::new();
    let mut ids: HashSet<String> = HashSet::new();
    let mut user_labels: HashMap<String, Label> = HashMap::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record.get(id_idx).unwrap_or("").to_string();
        let user_id = record.get(user_idx).unwrap_or("").to_string();
        if id.is_empty() || user_id.is_empty() {
            return Err(DataError::Malformed {
                line,
                message: "empty id or user id".into(),
            });
        }
        let label_text = record.get(label_idx).unwrap_or("");
        let label = label_text
            .parse::<i64>()
            .ok()
            .and_then(Label::from_int)
            .ok_or_else(|| DataError::Malformed {
                line,
                message: format!("label must be 0 or 1, found {label_text:?}"),
            })?;
        let mut paths = Vec::with_capacity(3);
        for (&col, name) in modality_idx.iter().zip(["breathing", "cough", "speech"]) {
            let text = record.get(col).unwrap_or("");
            if text.is_empty() {
                return Err(DataError::Malformed {
                    line,
                    message: format!("empty {name} path"),
                });
            }
            paths.push(PathBuf::from(text));
        }
        if !ids.insert(id.clone()) {
            return Err(DataError::DuplicateSampleId { id });
        }
        match user_labels.get(&user_id) {
            Some(&seen) if seen != label => {
                return Err(DataError::ConflictingUserLabels { user: user_id });
            }
            Some(_) => {}
            None => {
                user_labels.insert(user_id.clone(), label);
            }
        }
        let speech = paths.pop().expect("three paths");
        let cough = paths.pop().expect("two paths");
        let breathing = paths.pop().expect("one path");
        entries.push(ManifestEntry {
            id,
            user_id,
            label,
            breathing,
            cough,
            speech,
        });
    }
    if entries.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(entries)
}

/// Fractions of positive users routed to validation and test, plus the
/// shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

/// A user-disjoint partition of a dataset.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Splits a dataset into user-disjoint train/validation/test parts.
///
/// Validation receives `round(validation_fraction * P)` of the `P`
/// positive users and the same number of healthy users; test likewise
/// with `test_fraction`. Everything left, which is where the class
/// imbalance lives, goes to train. Users are assigned by shuffling
/// each class's user list with a ChaCha stream seeded from
/// `spec.seed` (positives first, then healthy), so the split is a pure
/// function of the dataset and the spec.
///
/// Errors if any partition would end up without at least one user of
/// each class.
pub fn split_by_user(data: &Dataset, spec: &SplitSpec) -> Result<DataSplit, DataError> {
    for (name, value) in [
        ("validation_fraction", spec.validation_fraction),
        ("test_fraction", spec.test_fraction),
    ] {
        if !value.is_finite() || value <= 0.0 || value >= 1.0 {
            return Err(DataError::InvalidSplitSpec(format!(
                "{name} must lie in (0, 1), got {value}"
            )));
        }
    }
    if spec.validation_fraction + spec.test_fraction >= 1.0 {
        return Err(DataError::InvalidSplitSpec(
            "validation_fraction + test_fraction must be below 1".into(),
        ));
    }

    let positive = data.positive_users();
    let healthy = data.healthy_users();
    let n_validation = round_half_up(spec.validation_fraction * positive.len() as f64);
    let n_test = round_half_up(spec.test_fraction * positive.len() as f64);
    let held_out = n_validation + n_test;
    if n_validation == 0 || n_test == 0 {
        return Err(DataError::InsufficientUsers(format!(
            "{} positive users round to an empty partition",
            positive.len()
        )));
    }
    for (class, total) in [("positive", positive.len()), ("healthy", healthy.len())] {
        if held_out >= total {
            return Err(DataError::InsufficientUsers(format!(
                "need {} {class} users beyond train, have {total}",
                held_out + 1
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut positive_order = positive;
    positive_order.shuffle(&mut rng);
    let mut healthy_order = healthy;
    healthy_order.shuffle(&mut rng);

    let mut validation_users: HashSet<&str> = HashSet::new();
    let mut test_users: HashSet<&str> = HashSet::new();
    let mut train_users: HashSet<&str> = HashSet::new();
    for order in [&positive_order, &healthy_order] {
        validation_users.extend(order[..n_validation].iter().copied());
        test_users.extend(order[n_validation..held_out].iter().copied());
        train_users.extend(order[held_out..].iter().copied());
    }

    Ok(DataSplit {
        train: data.subset_by_users(&train_users)?,
        validation: data.subset_by_users(&validation_users)?,
        test: data.subset_by_users(&test_users)?,
    })
}

/// Parameters for synthetic dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub positive_users: usize,
    pub healthy_users: usize,
    pub min_samples_per_user: usize,
    pub max_samples_per_user: usize,
    pub feature_dim: usize,
    /// Distance between the class means, in units of the per-feature
    /// marginal standard deviation (which is 1). Zero makes the
    /// classes statistically identical.
    pub separation: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<(), DataError> {
        let fail = |msg: String| Err(DataError::InvalidSyntheticConfig(msg));
        if self.positive_users == 0 || self.healthy_users == 0 {
            return fail("need at least one user per class".into());
        }
        if self.feature_dim == 0 {
            return fail("feature_dim must be positive".into());
        }
        if self.min_samples_per_user == 0 || self.min_samples_per_user > self.max_samples_per_user {
            return fail(format!(
                "samples per user range [{}, {}] is invalid",
                self.min_samples_per_user, self.max_samples_per_user
            ));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            return fail(format!(
                "separation must be finite and >= 0, got {}",
                self.separation
            ));
        }
        Ok(())
    }
}

/// Generates a synthetic screening dataset with user structure.
///
/// Healthy features are standard Gaussian; positive features are
/// shifted by `separation` along the unit diagonal direction. Each
/// user draws a persistent offset (variance 0.5 per feature) shared by
/// all of their samples, with independent within-user noise (variance
/// 0.5), so samples from one user are correlated while the marginal
/// per-feature variance stays 1 for both classes.
///
/// User ids are `p0001..` and `h0001..`; sample ids append `-s1..`.
/// Output is a pure function of the config.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.feature_dim;
    // Both the user offset and the within-user noise contribute half
    // the unit marginal variance.
    let component_std = 0.5f64.sqrt();
    let shift = config.separation / (dim as f64).sqrt();

    let mut samples = Vec::new();
    let classes = [
        (Label::Positive, config.positive_users, 'p', shift),
        (Label::Healthy, config.healthy_users, 'h', 0.0),
    ];
    for (label, user_count, prefix, class_shift) in classes {
        for u in 1..=user_count {
            let user_id = format!("{prefix}{u:04}");
            let n_samples =
                rng.random_range(config.min_samples_per_user..=config.max_samples_per_user);
            let offset: Vec<f64> = (0..dim)
                .map(|_| component_std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            for s in 1..=n_samples {
                let features: Vec<f64> = offset
                    .iter()
                    .map(|o| class_shift + o + component_std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                samples.push(Sample {
                    id: format!("{user_id}-s{s}"),
                    user_id: user_id.clone(),
                    features,
                    label,
                });
            }
        }
    }
    Dataset::from_samples(samples)
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, user: &str, features: Vec<f64>, label: Label) -> Sample {
        Sample {
            id: id.into(),
            user_id: user.into(),
            features,
            label,
        }
    }

    fn toy_dataset() -> Dataset {
        Dataset::from_samples(vec![
            sample("a1", "alice", vec![0.25, -1.5], Label::Positive),
            sample("a2", "alice", vec![1.0 / 3.0, 2.0], Label::Positive),
            sample("b1", "bob", vec![0.0, 0.125], Label::Healthy),
            sample("c1", "carol", vec![-2.75, 1e-12], Label::Healthy),
        ])
        .unwrap()
    }

    #[test]
    fn label_integer_encoding_round_trips() {
        assert_eq!(Label::from_int(0), Some(Label::Healthy));
        assert_eq!(Label::from_int(1), Some(Label::Positive));
        assert_eq!(Label::from_int(2), None);
        assert_eq!(Label::Positive.as_int(), 1);
        assert_eq!(Label::Healthy.as_int(), 0);
    }

    #[test]
    fn construction_rejects_invariant_violations() {
        assert!(matches!(
            Dataset::from_samples(vec![]),
            Err(DataError::Empty)
        ));
        assert!(matches!(
            Dataset::from_samples(vec![
                sample("x", "u", vec![1.0], Label::Healthy),
                sample("x", "u", vec![2.0], Label::Healthy),
            ]),
            Err(DataError::DuplicateSampleId { .. })
        ));
        assert!(matches!(
            Dataset::from_samples(vec![
                sample("x", "u", vec![1.0], Label::Healthy),
                sample("y", "u", vec![2.0], Label::Positive),
            ]),
            Err(DataError::ConflictingUserLabels { .. })
        ));
        assert!(matches!(
            Dataset::from_samples(vec![
                sample("x", "u", vec![1.0], Label::Healthy),
                sample("y", "v", vec![2.0, 3.0], Label::Healthy),
            ]),
            Err(DataError::InconsistentFeatureDim { .. })
        ));
        assert!(matches!(
            Dataset::from_samples(vec![sample("x", "u", vec![f64::NAN], Label::Healthy)]),
            Err(DataError::NonFiniteFeature { .. })
        ));
    }

    #[test]
    fn user_listings_follow_first_appearance() {
        let data = toy_dataset();
        assert_eq!(data.users(), vec!["alice", "bob", "carol"]);
        assert_eq!(data.positive_users(), vec!["alice"]);
        assert_eq!(data.healthy_users(), vec!["bob", "carol"]);
        assert_eq!(data.user_label("alice"), Some(Label::Positive));
        assert_eq!(data.user_label("nobody"), None);
        let counts = data.class_sample_counts();
        assert_eq!((counts.positive, counts.healthy), (2, 2));
        let users = data.class_user_counts();
        assert_eq!((users.positive, users.healthy), (1, 2));
    }

    #[test]
    fn tabular_round_trip_preserves_values_and_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data = toy_dataset();
        save_tabular(&data, &path).unwrap();

        let loaded = load_tabular(&path, &TabularSchema::default()).unwrap();
        assert_eq!(loaded, data);

        let first = std::fs::read(&path).unwrap();
        let path2 = dir.path().join("again.csv");
        save_tabular(&loaded, &path2).unwrap();
        assert_eq!(first, std::fs::read(&path2).unwrap());

        let header = String::from_utf8(first).unwrap();
        assert!(header.starts_with("id,user_id,label,f0,f1\n"));
    }

    #[test]
    fn load_reports_bad_label_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "id,user_id,label,f0\na,u,1,0.5\nb,v,2,0.5\n").unwrap();
        match load_tabular(&path, &TabularSchema::default()) {
            Err(DataError::Malformed { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains('2'), "{message}");
            }
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn load_honors_custom_schema_and_ignores_extra_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("foreign.csv");
        std::fs::write(
            &path,
            "clip,subject,site,status,x0,x1\nc1,s1,berlin,1,0.5,-0.25\nc2,s2,lima,0,1.5,2.5\n",
        )
        .unwrap();
        let schema = TabularSchema {
            id: "clip".into(),
            user: "subject".into(),
            label: "status".into(),
            feature_prefix: "x".into(),
        };
        let data = load_tabular(&path, &schema).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.feature_dim(), 2);
        assert_eq!(data.samples()[0].features, vec![0.5, -0.25]);
    }

    #[test]
    fn load_rejects_missing_and_misnamed_columns() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.csv");
        std::fs::write(&missing, "id,label,f0\na,1,0.5\n").unwrap();
        assert!(matches!(
            load_tabular(&missing, &TabularSchema::default()),
            Err(DataError::Malformed { line: 1, .. })
        ));

        let gap = dir.path().join("gap.csv");
        std::fs::write(&gap, "id,user_id,label,f0,f2\na,u,1,0.5,0.5\n").unwrap();
        assert!(matches!(
            load_tabular(&gap, &TabularSchema::default()),
            Err(DataError::Malformed { line: 1, .. })
        ));
    }

    fn one_sample_per_user(positive: usize, healthy: usize) -> Dataset {
        let mut samples = Vec::new();
        for u in 0..positive {
            samples.push(sample(
                &format!("p{u}-s"),
                &format!("p{u}"),
                vec![1.0],
                Label::Positive,
            ));
        }
        for u in 0..healthy {
            samples.push(sample(
                &format!("h{u}-s"),
                &format!("h{u}"),
                vec![0.0],
                Label::Healthy,
            ));
        }
        Dataset::from_samples(samples).unwrap()
    }

    #[test]
    fn split_matches_reference_user_counts() {
        // 330 positive and 919 healthy users with (0.10, 0.20) must
        // give 33+33 validation users, 66+66 test users and the
        // remaining 231 positive + 820 healthy users to train.
        let data = one_sample_per_user(330, 919);
        let split = split_by_user(
            &data,
            &SplitSpec {
                validation_fraction: 0.10,
                test_fraction: 0.20,
                seed: 7,
            },
        )
        .unwrap();
        let val = split.validation.class_user_counts();
        let test = split.test.class_user_counts();
        let train = split.train.class_user_counts();
        assert_eq!((val.positive, val.healthy), (33, 33));
        assert_eq!((test.positive, test.healthy), (66, 66));
        assert_eq!((train.positive, train.healthy), (231, 820));
    }

    #[test]
    fn split_partitions_users_exactly_once() {
        let data = one_sample_per_user(13, 41);
        let split = split_by_user(
            &data,
            &SplitSpec {
                validation_fraction: 0.2,
                test_fraction: 0.3,
                seed: 3,
            },
        )
        .unwrap();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for part in [&split.train, &split.validation, &split.test] {
            for user in part.users() {
                *seen.entry(user.to_string()).or_insert(0) += 1;
            }
        }
        assert_eq!(seen.len(), 54);
        assert!(seen.values().all(|&count| count == 1));

        let total: usize = [&split.train, &split.validation, &split.test]
            .iter()
            .map(|p| p.len())
            .sum();
        assert_eq!(total, data.len());
    }

    #[test]
    fn split_rounds_half_up() {
        // 20 positive users: 0.125 * 20 = 2.5 rounds up to 3.
        let data = one_sample_per_user(20, 20);
        let split = split_by_user(
            &data,
            &SplitSpec {
                validation_fraction: 0.125,
                test_fraction: 0.25,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(split.validation.class_user_counts().positive, 3);
        assert_eq!(split.test.class_user_counts().positive, 5);
        assert_eq!(split.train.class_user_counts().positive, 12);
    }

    #[test]
    fn split_is_seed_deterministic() {
        let data = one_sample_per_user(30, 90);
        let spec = SplitSpec {
            validation_fraction: 0.2,
            test_fraction: 0.2,
            seed: 11,
        };
        let a = split_by_user(&data, &spec).unwrap();
        let b = split_by_user(&data, &spec).unwrap();
        assert_eq!(a.test.samples(), b.test.samples());
        assert_eq!(a.validation.samples(), b.validation.samples());
        assert_eq!(a.train.samples(), b.train.samples());

        let c = split_by_user(&data, &SplitSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.test.samples(), c.test.samples());
    }

    #[test]
    fn split_rejects_partitions_without_both_classes() {
        let tiny = one_sample_per_user(3, 40);
        assert!(matches!(
            split_by_user(
                &tiny,
                &SplitSpec {
                    validation_fraction: 0.1,
                    test_fraction: 0.2,
                    seed: 0,
                }
            ),
            Err(DataError::InsufficientUsers(_))
        ));

        // Healthy users run out before train gets one.
        let few_healthy = one_sample_per_user(20, 9);
        assert!(matches!(
            split_by_user(
                &few_healthy,
                &SplitSpec {
                    validation_fraction: 0.25,
                    test_fraction: 0.25,
                    seed: 0,
                }
            ),
            Err(DataError::InsufficientUsers(_))
        ));
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let data = one_sample_per_user(10, 10);
        for (v, t) in [(0.0, 0.2), (0.5, 0.5), (1.2, 0.1), (f64::NAN, 0.1)] {
            assert!(matches!(
                split_by_user(
                    &data,
                    &SplitSpec {
                        validation_fraction: v,
                        test_fraction: t,
                        seed: 0,
                    }
                ),
                Err(DataError::InvalidSplitSpec(_))
            ));
        }
    }

    fn synth_config(separation: f64, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            positive_users: 40,
            healthy_users: 80,
            min_samples_per_user: 1,
            max_samples_per_user: 4,
            feature_dim: 4,
            separation,
            seed,
        }
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let a = generate_synthetic(&synth_config(1.0, 99)).unwrap();
        let b = generate_synthetic(&synth_config(1.0, 99)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&synth_config(1.0, 100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_respects_counts_and_ranges() {
        let data = generate_synthetic(&synth_config(0.5, 5)).unwrap();
        let users = data.class_user_counts();
        assert_eq!((users.positive, users.healthy), (40, 80));
        let mut per_user: HashMap<&str, usize> = HashMap::new();
        for s in data.samples() {
            *per_user.entry(s.user_id.as_str()).or_insert(0) += 1;
        }
        assert!(per_user.values().all(|&n| (1..=4).contains(&n)));
        assert_eq!(data.feature_dim(), 4);
    }

    #[test]
    fn large_separation_makes_classes_linearly_separable() {
        let data = generate_synthetic(&synth_config(10.0, 21)).unwrap();
        let project = |s: &Sample| s.features.iter().sum::<f64>() / (4.0f64).sqrt();
        let min_positive = data
            .samples()
            .iter()
            .filter(|s| s.label.is_positive())
            .map(project)
            .fold(f64::INFINITY, f64::min);
        let max_healthy = data
            .samples()
            .iter()
            .filter(|s| !s.label.is_positive())
            .map(project)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            min_positive > max_healthy,
            "projections overlap: {min_positive} <= {max_healthy}"
        );
    }

    #[test]
    fn zero_separation_makes_classes_indistinguishable() {
        let config = SyntheticConfig {
            positive_users: 150,
            healthy_users: 150,
            min_samples_per_user: 2,
            max_samples_per_user: 2,
            feature_dim: 3,
            separation: 0.0,
            seed: 17,
        };
        let data = generate_synthetic(&config).unwrap();
        let mean_of = |label: Label| -> Vec<f64> {
            let picked: Vec<&Sample> = data.samples().iter().filter(|s| s.label == label).collect();
            let mut mean = [0.0; 3];
            for s in &picked {
                for (m, v) in mean.iter_mut().zip(&s.features) {
                    *m += v;
                }
            }
            mean.iter().map(|m| m / picked.len() as f64).collect()
        };
        let pos_mean = mean_of(Label::Positive);
        let healthy_mean = mean_of(Label::Healthy);
        for (p, h) in pos_mean.iter().zip(&healthy_mean) {
            // Standard error is about 1/sqrt(300) ~ 0.06 per class.
            assert!((p - h).abs() < 0.3, "class means differ: {p} vs {h}");
        }
    }

    #[test]
    fn synthetic_users_are_internally_correlated() {
        let config = SyntheticConfig {
            positive_users: 1,
            healthy_users: 200,
            min_samples_per_user: 2,
            max_samples_per_user: 2,
            feature_dim: 8,
            separation: 0.0,
            seed: 31,
        };
        let data = generate_synthetic(&config).unwrap();
        let healthy: Vec<&Sample> = data
            .samples()
            .iter()
            .filter(|s| !s.label.is_positive())
            .collect();
        let dist2 = |a: &Sample, b: &Sample| -> f64 {
            a.features
                .iter()
                .zip(&b.features)
                .map(|(x, y)| (x - y) * (x - y))
                .sum()
        };
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for pair in healthy.chunks(2) {
            intra.push(dist2(pair[0], pair[1]));
        }
        for w in healthy.windows(3).step_by(2) {
            inter.push(dist2(w[0], w[2]));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        // Within-user squared distance has expectation D, across users 2D.
        assert!(
            mean(&intra) < 0.75 * mean(&inter),
            "intra {} vs inter {}",
            mean(&intra),
            mean(&inter)
        );
    }

    #[test]
    fn synthetic_rejects_invalid_configs() {
        for config in [
            SyntheticConfig {
                positive_users: 0,
                ..synth_config(1.0, 0)
            },
            SyntheticConfig {
                min_samples_per_user: 3,
                max_samples_per_user: 2,
                ..synth_config(1.0, 0)
            },
            SyntheticConfig {
                separation: -1.0,
                ..synth_config(1.0, 0)
            },
            SyntheticConfig {
                feature_dim: 0,
                ..synth_config(1.0, 0)
            },
        ] {
            assert!(matches!(
                generate_synthetic(&config),
                Err(DataError::InvalidSyntheticConfig(_))
            ));
        }
    }

    #[test]
    fn audio_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        std::fs::write(
            &path,
            "id,user_id,label,breathing,cough,speech\n\
             s1,u1,1,wav/b1.wav,wav/c1.wav,wav/v1.wav\n\
             s2,u2,0,wav/b2.wav,wav/c2.wav,wav/v2.wav\n",
        )
        .unwrap();
        let entries = load_audio_manifest(&path).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].label, Label::Positive);
        assert_eq!(entries[0].cough, PathBuf::from("wav/c1.wav"));
        assert_eq!(entries[1].user_id, "u2");
    }

    #[test]
    fn audio_manifest_rejects_missing_paths_and_duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        let empty_path = dir.path().join("hole.csv");
        std::fs::write(
            &empty_path,
            "id,user_id,label,breathing,cough,speech\ns1,u1,1,b.wav,,v.wav\n",
        )
        .unwrap();
        assert!(matches!(
            load_audio_manifest(&empty_path),
            Err(DataError::Malformed { line: 2, .. })
        ));

        let dup = dir.path().join("dup.csv");
        std::fs::write(
            &dup,
            "id,user_id,label,breathing,cough,speech\n\
             s1,u1,1,b.wav,c.wav,v.wav\ns1,u2,0,b.wav,c.wav,v.wav\n",
        )
        .unwrap();
        assert!(matches!(
            load_audio_manifest(&dup),
            Err(DataError::DuplicateSampleId { .. })
        ));
    }
}
