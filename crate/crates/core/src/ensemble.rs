//! Ensembles of independently trained units: probability fusion,
//! disagreement uncertainty and referral.
//!
//! A suite holds `N` units, one per balanced training bag, all
//! validated against the same shared validation set. At prediction
//! time each unit contributes its positive-class probability `p_i`;
//! the suite reports
//!
//! * `mean_prob`: the arithmetic mean of the `p_i`, the fused
//!   probability. Positive decision iff it exceeds 0.5; an exact tie
//!   resolves to healthy.
//! * `uncertainty`: the population standard deviation of the `p_i`
//!   (divide by `N`, not `N - 1`). It is zero exactly when the units
//!   agree and can never exceed 0.5, the spread of a half/half split
//!   between 0 and 1.
//!
//! High disagreement means the balanced bags support conflicting
//! explanations of the sample, so the prediction is forwarded for
//! repeat or clinical testing instead of being accepted: `referred`
//! is set whenever `uncertainty` exceeds the policy threshold.
//! A majority-vote fusion is included for comparison; ties between
//! voters fall back to the mean-probability rule.
//!
//! Unit training is embarrassingly parallel. Each unit derives its
//! own seed from the bag plan, so the parallel schedule can never
//! change the result.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, ClassifierSpec, TrainConfig, TrainedUnit};
use crate::dataset::{Dataset, Sample};
use crate::error::{EnsembleError, PersistError};
use crate::resampling::{make_bags, BagPlan};
use crate::seed::derive_seed;

const SUITE_FORMAT: &str = "ensemble-suite";
const SUITE_VERSION: u32 = 1;

/// Final call for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Healthy,
    Positive,
}

impl Decision {
    pub fn is_positive(self) -> bool {
        matches!(self, Decision::Positive)
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Healthy => write!(f, "healthy"),
            Decision::Positive => write!(f, "positive"),
        }
    }
}

impl FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "healthy" => Ok(Decision::Healthy),
            "positive" => Ok(Decision::Positive),
            other => Err(format!("unknown decision {other:?}")),
        }
    }
}

/// When to refer a prediction instead of accepting it, and which
/// escalation steps follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferralPolicy {
    /// Refer whenever the prediction's uncertainty exceeds this.
    pub sigma_threshold: f64,
    /// Ordered escalation steps; the first is recorded on referred
    /// predictions.
    pub escalation: Vec<String>,
}

impl Default for ReferralPolicy {
    fn default() -> Self {
        ReferralPolicy {
            sigma_threshold: 0.2,
            escalation: vec!["repeat-audio-test".into(), "clinical-test".into()],
        }
    }
}

impl ReferralPolicy {
    pub(crate) fn validate(&self) -> Result<(), EnsembleError> {
        if !self.sigma_threshold.is_finite() || self.sigma_threshold < 0.0 {
            return Err(EnsembleError::InvalidPolicy(format!(
                "sigma_threshold must be finite and >= 0, got {}",
                self.sigma_threshold
            )));
        }
        Ok(())
    }
}

/// The ensemble's full output for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub unit_probs: Vec<f64>,
    pub mean_prob: f64,
    pub uncertainty: f64,
    pub decision: Decision,
    pub referred: bool,
    /// First escalation step of the policy, set iff referred.
    pub escalation: Option<String>,
}

fn check_probs(unit_probs: &[f64]) -> Result<(), EnsembleError> {
    if unit_probs.is_empty() {
        return Err(EnsembleError::EmptyProbabilities);
    }
    for &p in unit_probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(EnsembleError::ProbabilityOutOfRange(p));
        }
    }
    Ok(())
}

fn decide(mean_prob: f64) -> Decision {
    if mean_prob > 0.5 {
        Decision::Positive
    } else {
        Decision::Healthy
    }
}

/// Arithmetic mean of the unit probabilities.
pub fn fuse_probability(unit_probs: &[f64]) -> Result<f64, EnsembleError> {
    check_probs(unit_probs)?;
    Ok(unit_probs.iter().sum::<f64>() / unit_probs.len() as f64)
}

/// Majority vote over per-unit decisions; a tied vote falls back to
/// the mean-probability rule.
pub fn fuse_majority(unit_probs: &[f64]) -> Result<Decision, EnsembleError> {
    check_probs(unit_probs)?;
    let positive = unit_probs.iter().filter(|&&p| p > 0.5).count();
    let healthy = unit_probs.len() - positive;
    match positive.cmp(&healthy) {
        std::cmp::Ordering::Greater => Ok(Decision::Positive),
        std::cmp::Ordering::Less => Ok(Decision::Healthy),
        std::cmp::Ordering::Equal => Ok(decide(fuse_probability(unit_probs)?)),
    }
}

/// Population standard deviation of the unit probabilities:
/// `sqrt((1/N) * sum((p_i - mean)^2))`.
///
/// A unanimous ensemble returns exactly 0, never a rounding residue:
/// referral rules compare sigma against thresholds with strict
/// inequalities, so "all units agree" must not drift above 0.
pub fn uncertainty(unit_probs: &[f64]) -> Result<f64, EnsembleError> {
    check_probs(unit_probs)?;
    if unit_probs.windows(2).all(|w| w[0] == w[1]) {
        return Ok(0.0);
    }
    let n = unit_probs.len() as f64;
    let mean = unit_probs.iter().sum::<f64>() / n;
    let variance = unit_probs
        .iter()
        .map(|p| (p - mean) * (p - mean))
        .sum::<f64>()
        / n;
    Ok(variance.sqrt())
}

/// Seed for training the unit of bag `index` (1-based). Bag draws use
/// the plan's streams `1..=n_bags`; unit training uses the disjoint
/// streams `n_bags+1..=2*n_bags`, so no two stages ever share RNG
/// state.
pub fn unit_seed(plan: &BagPlan, index: usize) -> u64 {
    derive_seed(plan.seed, (plan.n_bags + index) as u64)
}

/// `N` trained units plus the plan and bag membership that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSuite {
    units: Vec<TrainedUnit>,
    plan: BagPlan,
    bag_sample_ids: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct SuiteManifest {
    format: String,
    version: u32,
    plan: BagPlan,
    input_dim: usize,
    unit_seeds: Vec<u64>,
    units: Vec<String>,
    bags: Vec<String>,
}

impl EnsembleSuite {
    /// Assembles a suite from parts, checking the invariants: at least
    /// one unit, one bag id list per unit, a plan whose bag count
    /// matches, and a single shared input dimension.
    pub fn from_parts(
        units: Vec<TrainedUnit>,
        plan: BagPlan,
        bag_sample_ids: Vec<Vec<String>>,
    ) -> Result<EnsembleSuite, EnsembleError> {
        if units.is_empty() {
            return Err(EnsembleError::EmptySuite);
        }
        let input_dim = units[0].input_dim();
        for unit in &units {
            if unit.input_dim() != input_dim {
                return Err(EnsembleError::Train(
                    crate::error::TrainError::DimensionMismatch {
                        expected: input_dim,
                        found: unit.input_dim(),
                    },
                ));
            }
        }
        if plan.n_bags != units.len() || bag_sample_ids.len() != units.len() {
            return Err(EnsembleError::Bagging(
                crate::error::ResampleError::InvalidPlan(format!(
                    "plan covers {} bags but suite has {} units and {} bag lists",
                    plan.n_bags,
                    units.len(),
                    bag_sample_ids.len()
                )),
            ));
        }
        Ok(EnsembleSuite {
            units,
            plan,
            bag_sample_ids,
        })
    }

    pub fn units(&self) -> &[TrainedUnit] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn plan(&self) -> &BagPlan {
        &self.plan
    }

    pub fn bag_sample_ids(&self) -> &[Vec<String>] {
        &self.bag_sample_ids
    }

    pub fn input_dim(&self) -> usize {
        self.units[0].input_dim()
    }

    /// Runs every unit on `x` and fuses the result under `policy`.
    ///
    /// Pure: repeated calls return identical predictions.
    pub fn predict(&self, x: &[f64], policy: &ReferralPolicy) -> Result<Prediction, EnsembleError> {
        policy.validate()?;
        let mut unit_probs = Vec::with_capacity(self.units.len());
        for unit in &self.units {
            unit_probs.push(unit.predict_proba(x)?);
        }
        let mean_prob = fuse_probability(&unit_probs)?;
        let sigma = uncertainty(&unit_probs)?;
        let referred = sigma > policy.sigma_threshold;
        Ok(Prediction {
            decision: decide(mean_prob),
            escalation: if referred {
                policy.escalation.first().cloned()
            } else {
                None
            },
            unit_probs,
            mean_prob,
            uncertainty: sigma,
            referred,
        })
    }

    /// Predicts every sample in order.
    pub fn predict_batch(
        &self,
        samples: &[Sample],
        policy: &ReferralPolicy,
    ) -> Result<Vec<Prediction>, EnsembleError> {
        samples
            .iter()
            .map(|s| self.predict(&s.features, policy))
            .collect()
    }

    /// Writes the suite as a directory: `suite.json` (plan, seeds,
    /// file list), one JSON file per unit under `units/` and one id
    /// list per bag under `bags/`.
    pub fn save(&self, dir: &Path) -> Result<(), PersistError> {
        let io_err = |path: &Path, source: std::io::Error| PersistError::Io {
            path: path.to_path_buf(),
            source,
        };
        let units_dir = dir.join("units");
        let bags_dir = dir.join("bags");
        std::fs::create_dir_all(&units_dir).map_err(|e| io_err(&units_dir, e))?;
        std::fs::create_dir_all(&bags_dir).map_err(|e| io_err(&bags_dir, e))?;

        let mut unit_files = Vec::new();
        let mut bag_files = Vec::new();
        for (i, (unit, bag_ids)) in self.units.iter().zip(&self.bag_sample_ids).enumerate() {
            let unit_rel = format!("units/unit_{:03}.json", i + 1);
            unit.save(&dir.join(&unit_rel))?;
            unit_files.push(unit_rel);

            let bag_rel = format!("bags/bag_{:03}.txt", i + 1);
            let bag_path = dir.join(&bag_rel);
            let mut text = String::new();
            for id in bag_ids {
                text.push_str(id);
                text.push('\n');
            }
            std::fs::write(&bag_path, text).map_err(|e| io_err(&bag_path, e))?;
            bag_files.push(bag_rel);
        }

        let manifest = SuiteManifest {
            format: SUITE_FORMAT.to_string(),
            version: SUITE_VERSION,
            plan: self.plan,
            input_dim: self.input_dim(),
            unit_seeds: (1..=self.units.len())
                .map(|i| unit_seed(&self.plan, i))
                .collect(),
            units: unit_files,
            bags: bag_files,
        };
        let manifest_path = dir.join("suite.json");
        let json =
            serde_json::to_string_pretty(&manifest).map_err(|source| PersistError::Json {
                path: manifest_path.clone(),
                source,
            })?;
        std::fs::write(&manifest_path, json).map_err(|e| io_err(&manifest_path, e))
    }

    /// Loads a suite saved by [`EnsembleSuite::save`], re-validating
    /// every invariant. Predictions after a round trip are bitwise
    /// identical.
    pub fn load(dir: &Path) -> Result<EnsembleSuite, PersistError> {
        let manifest_path = dir.join("suite.json");
        let invalid = |message: String| PersistError::Invalid {
            path: manifest_path.clone(),
            message,
        };
        let text = std::fs::read_to_string(&manifest_path).map_err(|source| PersistError::Io {
            path: manifest_path.clone(),
            source,
        })?;
        let manifest: SuiteManifest =
            serde_json::from_str(&text).map_err(|source| PersistError::Json {
                path: manifest_path.clone(),
                source,
            })?;
        if manifest.format != SUITE_FORMAT {
            return Err(invalid(format!("unexpected format {:?}", manifest.format)));
        }
        if manifest.version != SUITE_VERSION {
            return Err(invalid(format!(
                "unsupported version {} (expected {SUITE_VERSION})",
                manifest.version
            )));
        }
        if manifest.units.len() != manifest.bags.len()
            || manifest.units.len() != manifest.unit_seeds.len()
        {
            return Err(invalid("unit, bag and seed lists differ in length".into()));
        }

        let mut units = Vec::with_capacity(manifest.units.len());
        for rel in &manifest.units {
            units.push(TrainedUnit::load(&dir.join(rel))?);
        }
        let mut bag_sample_ids = Vec::with_capacity(manifest.bags.len());
        for rel in &manifest.bags {
            let bag_path = dir.join(rel);
            let text = std::fs::read_to_string(&bag_path).map_err(|source| PersistError::Io {
                path: bag_path.clone(),
                source,
            })?;
            bag_sample_ids.push(text.lines().map(str::to_string).collect::<Vec<String>>());
        }
        for (i, (unit, &seed)) in units.iter().zip(&manifest.unit_seeds).enumerate() {
            if unit.config.seed != seed {
                return Err(invalid(format!(
                    "unit {} was trained with seed {}, manifest says {}",
                    i + 1,
                    unit.config.seed,
                    seed
                )));
            }
        }
        if units
            .first()
            .is_some_and(|u| u.input_dim() != manifest.input_dim)
        {
            return Err(invalid("input_dim disagrees with units".into()));
        }
        EnsembleSuite::from_parts(units, manifest.plan, bag_sample_ids)
            .map_err(|e| invalid(e.to_string()))
    }
}

/// Trains one unit per balanced bag against the shared validation set.
///
/// Bags come from [`make_bags`]; unit `i` trains on bag `i` with the
/// seed [`unit_seed`]`(plan, i)`. Units train in parallel, and because
/// every unit's randomness is self-contained the outcome is identical
/// to sequential training.
pub fn train_suite(
    train: &Dataset,
    validation: &Dataset,
    plan: &BagPlan,
    spec: &ClassifierSpec,
    config: &TrainConfig,
) -> Result<EnsembleSuite, EnsembleError> {
    let bags = make_bags(train, plan)?;
    let validation_samples = validation.samples();
    let units = bags
        .par_iter()
        .map(|bag| {
            let unit_config = TrainConfig {
                seed: unit_seed(plan, bag.index),
                ..*config
            };
            classifier::train(spec, &unit_config, &bag.samples, validation_samples)
        })
        .collect::<Result<Vec<TrainedUnit>, _>>()?;
    let bag_sample_ids = bags
        .iter()
        .map(|bag| bag.samples.iter().map(|s| s.id.clone()).collect())
        .collect();
    EnsembleSuite::from_parts(units, *plan, bag_sample_ids)
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::EpochStats;
    use crate::dataset::{generate_synthetic, split_by_user, SplitSpec, SyntheticConfig};
    use crate::resampling::down_sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fuse_probability_is_the_arithmetic_mean() {
        assert_eq!(fuse_probability(&[0.5, 0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(fuse_probability(&[0.0, 1.0]).unwrap(), 0.5);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(1..20);
            let probs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mut total = 0.0;
            for &p in &probs {
                total += p;
            }
            let expected = total / n as f64;
            assert!((fuse_probability(&probs).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn fused_probability_stays_between_min_and_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.random_range(1..15);
            let mut probs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let fused = fuse_probability(&probs).unwrap();
            let lo = probs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(fused >= lo - 1e-15 && fused <= hi + 1e-15);

            // Permutation invariance holds up to summation rounding.
            probs.reverse();
            assert!((fuse_probability(&probs).unwrap() - fused).abs() < 1e-12);
        }
    }

    #[test]
    fn majority_vote_counts_sides_and_breaks_ties_by_mean() {
        assert_eq!(fuse_majority(&[0.9, 0.9, 0.1]).unwrap(), Decision::Positive);
        assert_eq!(fuse_majority(&[0.6, 0.4]).unwrap(), Decision::Healthy);
        assert_eq!(fuse_majority(&[0.51; 10]).unwrap(), Decision::Positive);
        // Tie with mean above 0.5 goes positive.
        assert_eq!(fuse_majority(&[0.9, 0.3]).unwrap(), Decision::Positive);
    }

    #[test]
    fn uncertainty_matches_population_std() {
        assert_eq!(uncertainty(&[0.3, 0.3, 0.3, 0.3]).unwrap(), 0.0);
        assert_eq!(uncertainty(&[0.0, 1.0]).unwrap(), 0.5);
        let sigma = uncertainty(&[0.05, 0.95, 0.05, 0.95]).unwrap();
        assert!((sigma - 0.45).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..15);
            let probs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mean = probs.iter().sum::<f64>() / n as f64;
            let mut acc = 0.0;
            for &p in &probs {
                acc += (p - mean) * (p - mean);
            }
            let expected = (acc / n as f64).sqrt();
            let got = uncertainty(&probs).unwrap();
            assert!((got - expected).abs() < 1e-15);
            assert!((0.0..=0.5 + 1e-15).contains(&got));
        }
    }

    #[test]
    fn fusion_validates_inputs() {
        assert!(matches!(
            fuse_probability(&[]),
            Err(EnsembleError::EmptyProbabilities)
        ));
        assert!(matches!(
            uncertainty(&[]),
            Err(EnsembleError::EmptyProbabilities)
        ));
        assert!(matches!(
            fuse_majority(&[0.2, 1.2]),
            Err(EnsembleError::ProbabilityOutOfRange(_))
        ));
        assert!(matches!(
            fuse_probability(&[f64::NAN]),
            Err(EnsembleError::ProbabilityOutOfRange(_))
        ));
    }

    fn forged_unit(bias: f64, seed: u64) -> TrainedUnit {
        TrainedUnit {
            spec: ClassifierSpec::logistic(2),
            config: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            parameters: vec![0.0, 0.0, bias],
            history: vec![EpochStats {
                epoch: 1,
                train_loss: 0.5,
                validation_loss: 0.5,
            }],
            stopped_epoch: 1,
        }
    }

    fn forged_suite(biases: &[f64]) -> EnsembleSuite {
        let plan = BagPlan {
            n_bags: biases.len(),
            seed: 0,
        };
        let units: Vec<TrainedUnit> = biases
            .iter()
            .enumerate()
            .map(|(i, &b)| forged_unit(b, unit_seed(&plan, i + 1)))
            .collect();
        let bags = vec![vec!["a".to_string()]; biases.len()];
        EnsembleSuite::from_parts(units, plan, bags).unwrap()
    }

    #[test]
    fn predict_fuses_unit_outputs_and_applies_the_policy() {
        // Logistic units with zero weights output sigmoid(bias).
        let suite = forged_suite(&[2.0, 2.0, -2.0]);
        let policy = ReferralPolicy {
            sigma_threshold: 0.2,
            escalation: vec!["repeat-audio-test".into(), "clinical-test".into()],
        };
        let pred = suite.predict(&[0.0, 0.0], &policy).unwrap();
        let p_hi = 1.0 / (1.0 + (-2.0f64).exp());
        let p_lo = 1.0 - p_hi;
        assert!((pred.unit_probs[0] - p_hi).abs() < 1e-12);
        assert!((pred.unit_probs[2] - p_lo).abs() < 1e-12);
        assert!((pred.mean_prob - (2.0 * p_hi + p_lo) / 3.0).abs() < 1e-12);
        assert_eq!(pred.decision, Decision::Positive);
        assert!(
            pred.referred,
            "sigma {} should exceed 0.2",
            pred.uncertainty
        );
        assert_eq!(pred.escalation.as_deref(), Some("repeat-audio-test"));

        // Repeated calls are identical.
        assert_eq!(suite.predict(&[0.0, 0.0], &policy).unwrap(), pred);
    }

    #[test]
    fn exact_half_mean_resolves_to_healthy() {
        let suite = forged_suite(&[0.0, 0.0]);
        let policy = ReferralPolicy {
            sigma_threshold: 0.0,
            escalation: vec![],
        };
        let pred = suite.predict(&[1.0, -1.0], &policy).unwrap();
        assert_eq!(pred.mean_prob, 0.5);
        assert_eq!(pred.decision, Decision::Healthy);
        assert_eq!(pred.uncertainty, 0.0);
        // Sigma is exactly zero, not above the zero threshold.
        assert!(!pred.referred);
        assert_eq!(pred.escalation, None);
    }

    #[test]
    fn agreeing_units_make_majority_and_mean_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let positive_side = rng.random::<bool>();
            let probs: Vec<f64> = (0..n)
                .map(|_| {
                    if positive_side {
                        rng.random_range(0.5001..1.0)
                    } else {
                        rng.random_range(0.0..0.4999)
                    }
                })
                .collect();
            let by_mean = decide(fuse_probability(&probs).unwrap());
            let by_vote = fuse_majority(&probs).unwrap();
            assert_eq!(by_mean, by_vote);
        }
    }

    #[test]
    fn policy_rejects_negative_threshold() {
        let suite = forged_suite(&[0.0]);
        let policy = ReferralPolicy {
            sigma_threshold: -0.1,
            escalation: vec![],
        };
        assert!(matches!(
            suite.predict(&[0.0, 0.0], &policy),
            Err(EnsembleError::InvalidPolicy(_))
        ));
    }

    #[test]
    fn from_parts_enforces_suite_invariants() {
        let plan = BagPlan { n_bags: 1, seed: 0 };
        assert!(matches!(
            EnsembleSuite::from_parts(vec![], plan, vec![]),
            Err(EnsembleError::EmptySuite)
        ));

        let mut other = forged_unit(0.0, unit_seed(&plan, 2));
        other.spec = ClassifierSpec::logistic(3);
        other.parameters = vec![0.0; 4];
        let two_dims = vec![forged_unit(0.0, unit_seed(&plan, 1)), other];
        assert!(matches!(
            EnsembleSuite::from_parts(
                two_dims,
                BagPlan { n_bags: 2, seed: 0 },
                vec![vec![], vec![]]
            ),
            Err(EnsembleError::Train(_))
        ));

        assert!(matches!(
            EnsembleSuite::from_parts(
                vec![forged_unit(0.0, 0)],
                BagPlan { n_bags: 3, seed: 0 },
                vec![vec![]]
            ),
            Err(EnsembleError::Bagging(_))
        ));
    }

    fn small_split() -> (Dataset, Dataset) {
        let data = generate_synthetic(&SyntheticConfig {
            positive_users: 10,
            healthy_users: 40,
            min_samples_per_user: 1,
            max_samples_per_user: 2,
            feature_dim: 3,
            separation: 2.0,
            seed: 7,
        })
        .unwrap();
        let split = split_by_user(
            &data,
            &SplitSpec {
                validation_fraction: 0.2,
                test_fraction: 0.2,
                seed: 8,
            },
        )
        .unwrap();
        (split.train, split.validation)
    }

    fn fast_config() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.01,
            max_epochs: 5,
            patience: 5,
            batch_size: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn train_suite_is_deterministic_and_matches_bag_membership() {
        let (train, validation) = small_split();
        let plan = BagPlan {
            n_bags: 4,
            seed: 17,
        };
        let spec = ClassifierSpec::logistic(3);
        let suite = train_suite(&train, &validation, &plan, &spec, &fast_config()).unwrap();
        assert_eq!(suite.n_units(), 4);
        assert_eq!(suite.input_dim(), 3);

        let again = train_suite(&train, &validation, &plan, &spec, &fast_config()).unwrap();
        assert_eq!(suite, again);

        // Bag membership must agree with what make_bags draws directly.
        let bags = make_bags(&train, &plan).unwrap();
        for (bag, ids) in bags.iter().zip(suite.bag_sample_ids()) {
            let expected: Vec<String> = bag.samples.iter().map(|s| s.id.clone()).collect();
            assert_eq!(&expected, ids);
        }

        for (i, unit) in suite.units().iter().enumerate() {
            assert_eq!(unit.config.seed, unit_seed(&plan, i + 1));
            assert!(!unit.history.is_empty());
        }
    }

    #[test]
    fn single_bag_suite_equals_seeded_down_sampling() {
        let (train, validation) = small_split();
        let plan = BagPlan {
            n_bags: 1,
            seed: 23,
        };
        let spec = ClassifierSpec::logistic(3);
        let suite = train_suite(&train, &validation, &plan, &spec, &fast_config()).unwrap();

        // A single bag is one balanced subset; down-sampling with the
        // bag's derived seed selects the identical users.
        let subset = down_sample(&train, derive_seed(plan.seed, 1)).unwrap();
        let subset_ids: Vec<String> = subset.samples().iter().map(|s| s.id.clone()).collect();
        assert_eq!(&subset_ids, &suite.bag_sample_ids()[0]);

        let config = TrainConfig {
            seed: unit_seed(&plan, 1),
            ..fast_config()
        };
        let unit =
            classifier::train(&spec, &config, subset.samples(), validation.samples()).unwrap();
        assert_eq!(unit.parameters, suite.units()[0].parameters);
    }

    #[test]
    fn suite_round_trip_preserves_predictions_bitwise() {
        let (train, validation) = small_split();
        let plan = BagPlan {
            n_bags: 3,
            seed: 29,
        };
        let spec = ClassifierSpec::mlp_head(3);
        let suite = train_suite(&train, &validation, &plan, &spec, &fast_config()).unwrap();

        let dir = tempfile::tempdir().unwrap();
        suite.save(dir.path()).unwrap();
        let loaded = EnsembleSuite::load(dir.path()).unwrap();
        assert_eq!(loaded, suite);

        let policy = ReferralPolicy::default();
        for sample in validation.samples() {
            let a = suite.predict(&sample.features, &policy).unwrap();
            let b = loaded.predict(&sample.features, &policy).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn suite_load_rejects_tampered_manifests() {
        let (train, validation) = small_split();
        let plan = BagPlan {
            n_bags: 2,
            seed: 31,
        };
        let suite = train_suite(
            &train,
            &validation,
            &plan,
            &ClassifierSpec::logistic(3),
            &fast_config(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        suite.save(dir.path()).unwrap();

        let manifest_path = dir.path().join("suite.json");
        let mut doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
        doc["unit_seeds"][0] = serde_json::json!(12345);
        std::fs::write(&manifest_path, serde_json::to_string(&doc).unwrap()).unwrap();
        assert!(matches!(
            EnsembleSuite::load(dir.path()),
            Err(PersistError::Invalid { .. })
        ));

        doc["version"] = serde_json::json!(9);
        std::fs::write(&manifest_path, serde_json::to_string(&doc).unwrap()).unwrap();
        assert!(matches!(
            EnsembleSuite::load(dir.path()),
            Err(PersistError::Invalid { .. })
        ));
    }
}
