//! End-to-end flow over synthetic data: generate, split by user,
//! train an ensemble, predict with a referral policy, evaluate, and
//! round-trip the trained suite through disk.

use balsa::classifier::{ClassifierKind, ClassifierSpec, TrainConfig};
use balsa::dataset::{self, DataSplit, SplitSpec, SyntheticConfig};
use balsa::ensemble::{train_suite, ReferralPolicy};
use balsa::metrics;
use balsa::BagPlan;

fn fixture_split() -> DataSplit {
    let data = dataset::generate_synthetic(&SyntheticConfig {
        positive_users: 14,
        healthy_users: 40,
        min_samples_per_user: 1,
        max_samples_per_user: 3,
        feature_dim: 8,
        separation: 2.0,
        seed: 424,
    })
    .unwrap();
    dataset::split_by_user(
        &data,
        &SplitSpec {
            validation_fraction: 0.15,
            test_fraction: 0.25,
            seed: 424,
        },
    )
    .unwrap()
}

fn fixture_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        max_epochs: 30,
        ..TrainConfig::default()
    }
}

#[test]
fn ensemble_separates_synthetic_classes_and_reports_consistently() {
    let split = fixture_split();
    let plan = BagPlan {
        n_bags: 3,
        seed: 99,
    };
    let spec = ClassifierSpec {
        kind: ClassifierKind::MlpHead,
        input_dim: 8,
        hidden_units: 16,
    };
    let suite = train_suite(
        &split.train,
        &split.validation,
        &plan,
        &spec,
        &fixture_config(),
    )
    .unwrap();
    assert_eq!(suite.n_units(), 3);

    let policy = ReferralPolicy::default();
    let preds = suite.predict_batch(split.test.samples(), &policy).unwrap();
    let labels: Vec<_> = split.test.samples().iter().map(|s| s.label).collect();
    let ids: Vec<String> = split.test.samples().iter().map(|s| s.id.clone()).collect();

    let report = metrics::evaluate(&preds, &labels, &ids).unwrap();
    assert!(
        report.roc.auc > 0.75,
        "well-separated synthetic data should be learnable, got AUC {}",
        report.roc.auc
    );
    assert_eq!(report.confusion.total(), split.test.len());
    assert_eq!(
        report.referral_by_fraction.entries.last().unwrap().auc,
        Some(report.roc.auc)
    );
    assert_eq!(
        report.uncertainty_correct.count + report.uncertainty_incorrect.count,
        split.test.len()
    );

    // The referred flag restates the policy's strict threshold.
    for pred in &preds {
        assert_eq!(pred.referred, pred.uncertainty > policy.sigma_threshold);
        assert_eq!(pred.referred, pred.escalation.is_some());
    }
}

#[test]
fn training_is_deterministic_for_a_fixed_plan() {
    let split = fixture_split();
    let plan = BagPlan { n_bags: 2, seed: 7 };
    let spec = ClassifierSpec::logistic(8);
    let config = fixture_config();

    let first = train_suite(&split.train, &split.validation, &plan, &spec, &config).unwrap();
    let second = train_suite(&split.train, &split.validation, &plan, &spec, &config).unwrap();
    for (a, b) in first.units().iter().zip(second.units()) {
        assert_eq!(a.parameters, b.parameters);
    }
    assert_eq!(first.bag_sample_ids(), second.bag_sample_ids());
}

#[test]
fn saved_suite_reproduces_predictions_bit_for_bit() {
    let split = fixture_split();
    let plan = BagPlan {
        n_bags: 3,
        seed: 55,
    };
    let spec = ClassifierSpec::logistic(8);
    let suite = train_suite(
        &split.train,
        &split.validation,
        &plan,
        &spec,
        &fixture_config(),
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let suite_dir = dir.path().join("suite");
    suite.save(&suite_dir).unwrap();
    let loaded = balsa::EnsembleSuite::load(&suite_dir).unwrap();

    let policy = ReferralPolicy::default();
    let before = suite.predict_batch(split.test.samples(), &policy).unwrap();
    let after = loaded.predict_batch(split.test.samples(), &policy).unwrap();
    assert_eq!(before, after);
}

#[test]
fn zero_threshold_refers_every_disagreeing_prediction() {
    let split = fixture_split();
    let plan = BagPlan {
        n_bags: 3,
        seed: 21,
    };
    let spec = ClassifierSpec::logistic(8);
    let suite = train_suite(
        &split.train,
        &split.validation,
        &plan,
        &spec,
        &fixture_config(),
    )
    .unwrap();

    // Units trained on different bags give (generically) different
    // probabilities, so with a zero threshold everything is referred.
    let policy = ReferralPolicy {
        sigma_threshold: 0.0,
        ..ReferralPolicy::default()
    };
    let preds = suite.predict_batch(split.test.samples(), &policy).unwrap();
    assert!(preds.iter().all(|p| p.referred));
}
