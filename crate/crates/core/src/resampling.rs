//! Class balancing for heavily imbalanced training partitions.
//!
//! Three strategies are provided:
//!
//! * [`make_bags`]: the ensemble construction. Every bag keeps all
//!   positive training users and pairs them with an equal number of
//!   healthy users drawn uniformly at random, without replacement
//!   within a bag and independently across bags. Together the bags
//!   cover far more of the majority class than any single balanced
//!   subset could.
//! * [`down_sample`]: one balanced subset, i.e. a single bag. The
//!   classical baseline that discards most healthy users.
//! * [`smote_upsample`]: the opposite baseline, synthesizing minority
//!   samples along segments between nearest neighbours until the
//!   sample counts balance.
//!
//! Bag selection operates on users, never on samples: all samples of a
//! selected user enter the bag, so no user straddles the in/out
//! boundary. Interpolation in SMOTE is the one exception where
//! synthetic samples have no real user; they are assigned the reserved
//! user id [`SYNTHETIC_USER_ID`].

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Label, Sample};
use crate::error::ResampleError;
use crate::seed::derive_seed;

/// User id assigned to interpolated samples. Inputs may not use this
/// id for a healthy user.
pub const SYNTHETIC_USER_ID: &str = "synthetic";

/// Default neighbour count for [`smote_upsample`].
pub const DEFAULT_SMOTE_NEIGHBORS: usize = 5;

/// Default bag count for [`make_bags`].
pub const DEFAULT_BAG_COUNT: usize = 10;

/// How many balanced bags to draw and from which seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BagPlan {
    pub n_bags: usize,
    pub seed: u64,
}

/// One balanced training bag. `index` is 1-based and doubles as the
/// RNG stream of the bag, so any bag can be regenerated on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBag {
    pub index: usize,
    pub samples: Vec<Sample>,
}

impl TrainingBag {
    pub fn sample_ids(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Writes a bag's sample ids, one per line.
pub fn write_bag_manifest(bag: &TrainingBag, path: &Path) -> std::io::Result<()> {
    let mut text = String::with_capacity(bag.samples.len() * 8);
    for sample in &bag.samples {
        text.push_str(&sample.id);
        text.push('\n');
    }
    std::fs::write(path, text)
}

fn balanced_user_subset<'a>(
    train: &'a Dataset,
    rng: &mut ChaCha8Rng,
) -> Result<(HashSet<&'a str>, usize), ResampleError> {
    let positive_users = train.positive_users();
    let healthy_users = train.healthy_users();
    if positive_users.is_empty() {
        return Err(ResampleError::NoPositiveUsers);
    }
    if healthy_users.len() < positive_users.len() {
        return Err(ResampleError::InsufficientHealthyUsers {
            positive: positive_users.len(),
            healthy: healthy_users.len(),
        });
    }
    let picked = rand::seq::index::sample(rng, healthy_users.len(), positive_users.len());
    let mut keep: HashSet<&str> = positive_users.into_iter().collect();
    let kept_positive = keep.len();
    keep.extend(picked.iter().map(|i| healthy_users[i]));
    Ok((keep, kept_positive))
}

fn collect_users(train: &Dataset, keep: &HashSet<&str>) -> Vec<Sample> {
    train
        .samples()
        .iter()
        .filter(|s| keep.contains(s.user_id.as_str()))
        .cloned()
        .collect()
}

/// Draws `plan.n_bags` balanced training bags.
///
/// Each bag keeps every positive user and an equal number of healthy
/// users sampled uniformly without replacement. Draws are independent
/// across bags (a healthy user may appear in several bags) and each
/// bag's RNG is seeded with `derive_seed(plan.seed, index)`, so the
/// result is a pure function of the training partition and the plan.
pub fn make_bags(train: &Dataset, plan: &BagPlan) -> Result<Vec<TrainingBag>, ResampleError> {
    if plan.n_bags == 0 {
        return Err(ResampleError::InvalidPlan("n_bags must be positive".into()));
    }
    (1..=plan.n_bags)
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, index as u64));
            let (keep, _) = balanced_user_subset(train, &mut rng)?;
            Ok(TrainingBag {
                index,
                samples: collect_users(train, &keep),
            })
        })
        .collect()
}

/// Draws one balanced subset of the training partition; the
/// down-sampling baseline. Equivalent to a single bag seeded directly
/// with `seed`.
///
/// An already balanced partition passes through unchanged.
pub fn down_sample(train: &Dataset, seed: u64) -> Result<Dataset, ResampleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (keep, _) = balanced_user_subset(train, &mut rng)?;
    let samples = collect_users(train, &keep);
    Ok(Dataset::from_validated(samples, train.feature_dim()))
}

/// Balances the training partition by synthesizing positive samples.
///
/// New samples are drawn by picking a random positive sample `a`, one
/// of its `k` nearest positive neighbours `b` (Euclidean distance,
/// ties by position) and a uniform `u in [0, 1)`, then interpolating
/// `a + u * (b - a)`. Synthesis repeats until positive and healthy
/// sample counts are equal. Synthetic samples get fresh `syn-*` ids
/// and the reserved [`SYNTHETIC_USER_ID`]; original samples are kept
/// bit for bit.
///
/// A partition whose positive count already matches or exceeds the
/// healthy count is returned unchanged.
pub fn smote_upsample(train: &Dataset, k: usize, seed: u64) -> Result<Dataset, ResampleError> {
    if k == 0 {
        return Err(ResampleError::InvalidPlan(
            "neighbour count k must be positive".into(),
        ));
    }
    if train.user_label(SYNTHETIC_USER_ID) == Some(Label::Healthy) {
        return Err(ResampleError::InvalidPlan(format!(
            "input uses the reserved user id {SYNTHETIC_USER_ID:?} for a healthy user"
        )));
    }
    let counts = train.class_sample_counts();
    if counts.positive >= counts.healthy {
        return Ok(train.clone());
    }
    if counts.positive < k + 1 {
        return Err(ResampleError::TooFewPositiveSamples {
            needed: k + 1,
            found: counts.positive,
        });
    }

    let positives: Vec<&Sample> = train
        .samples()
        .iter()
        .filter(|s| s.label.is_positive())
        .collect();
    // Brute-force k nearest neighbours among the other positives.
    // Squared distances order the same as distances.
    let neighbors: Vec<Vec<usize>> = (0..positives.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..positives.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let d2: f64 = positives[i]
                        .features
                        .iter()
                        .zip(&positives[j].features)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d2, j)
                })
                .collect();
            others.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            others.truncate(k);
            others.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let existing: HashSet<&str> = train.samples().iter().map(|s| s.id.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut synthetic = Vec::with_capacity(counts.healthy - counts.positive);
    let mut id_counter = 1usize;
    for _ in 0..counts.healthy - counts.positive {
        let source = rng.random_range(0..positives.len());
        let neighbor = neighbors[source][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let features: Vec<f64> = positives[source]
            .features
            .iter()
            .zip(&positives[neighbor].features)
            .map(|(a, b)| a + u * (b - a))
            .collect();
        let id = loop {
            let candidate = format!("syn-{id_counter}");
            id_counter += 1;
            if !existing.contains(candidate.as_str()) {
                break candidate;
            }
        };
        synthetic.push(Sample {
            id,
            user_id: SYNTHETIC_USER_ID.to_string(),
            features,
            label: Label::Positive,
        });
    }

    let mut samples = train.samples().to_vec();
    samples.extend(synthetic);
    Ok(Dataset::from_validated(samples, train.feature_dim()))
}

// ============================================================================
// Tests
// ============================================================================
