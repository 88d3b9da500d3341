//! `balsa experiment`: repeated train/evaluate cycles for one
//! balancing strategy, with per-repeat artifacts and a cross-repeat
//! aggregate.
//!
//! Each repeat r (1-based) works from `run_seed = seed + (r - 1)`. The
//! data is resplit by user with that seed unless the split is frozen,
//! the strategy trains on the repeat's training set, and the held-out
//! test users are scored and evaluated. The single-classifier
//! strategies are wrapped as one-unit suites so scoring, persistence,
//! and reporting are identical across strategies; their seed streams
//! match a one-bag ensemble, so `down_sample` reproduces exactly what a
//! one-bag ensemble would train.
//!
//! A failing repeat stops the run but preserves everything written so
//! far, plus a `FAILED.txt` marker with the error and a manifest of the
//! partial artifacts.

use std::path::{Path, PathBuf};

use balsa::classifier::train;
use balsa::dataset::{load_tabular, split_by_user, Dataset, TabularSchema};
use balsa::ensemble::{train_suite, unit_seed};
use balsa::metrics::{evaluate, roc_auc};
use balsa::resampling::{down_sample, smote_upsample, BagPlan, DEFAULT_SMOTE_NEIGHBORS};
use balsa::seed::derive_seed;
use balsa::{ClassifierSpec, EnsembleSuite, EvaluationReport, Label, Prediction, TrainConfig};

use crate::config::{ConfigError, RunConfig, Strategy};
use crate::error::CliError;
use crate::plot::{line_chart, paired_bar_chart, Series};
use crate::report::{
    aggregate_csv, histogram_csv, metrics_csv, predictions_csv, referral_csv, roc_csv, summary_csv,
    unit_auc_csv, unit_roc_points_csv, AggregateReport, RepeatRow,
};
use crate::runs::{next_run_dir, write_atomic, write_manifest};

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub run_dir: PathBuf,
    pub aggregate: AggregateReport,
}

pub fn run(config: &RunConfig) -> Result<ExperimentOutcome, CliError> {
    config.validate()?;
    let dataset_path = config
        .dataset
        .clone()
        .ok_or_else(|| ConfigError::Invalid("a dataset path is required".into()))?;
    let data = load_tabular(&dataset_path, &TabularSchema::default())?;

    let run_dir = next_run_dir(&config.output_dir, "run")?;
    let effective = config.effective_toml();
    let config_hash = config.sha256();
    write_atomic(&run_dir.join("config.effective.toml"), effective.as_bytes())?;

    let mut rows: Vec<RepeatRow> = Vec::new();
    for repeat in 1..=config.n_repeats {
        match run_repeat(config, &data, &run_dir, repeat) {
            Ok(row) => rows.push(row),
            Err(err) => {
                let marker = format!(
                    "repeat {repeat} failed: {err}\ncompleted repeats: {}\n",
                    rows.len()
                );
                write_atomic(&run_dir.join("FAILED.txt"), marker.as_bytes())?;
                write_manifest(&run_dir, "experiment", &config_hash, &[dataset_path])?;
                return Err(err);
            }
        }
    }

    let aggregate = AggregateReport::from_rows(&rows);
    write_atomic(
        &run_dir.join("aggregate.json"),
        &serde_json::to_vec_pretty(&aggregate).expect("aggregate serializes"),
    )?;
    write_atomic(
        &run_dir.join("aggregate.csv"),
        aggregate_csv(&aggregate).as_bytes(),
    )?;
    write_atomic(&run_dir.join("summary.csv"), summary_csv(&rows).as_bytes())?;
    write_manifest(&run_dir, "experiment", &config_hash, &[dataset_path])?;

    println!("run directory: {}", run_dir.display());
    println!(
        "{} x {}: auc {:.4} (std {:.4}), sensitivity {:.4} (std {:.4}), specificity {:.4} (std {:.4})",
        config.n_repeats,
        config.strategy,
        aggregate.auc.mean,
        aggregate.auc.std,
        aggregate.sensitivity.mean,
        aggregate.sensitivity.std,
        aggregate.specificity.mean,
        aggregate.specificity.std
    );
    Ok(ExperimentOutcome { run_dir, aggregate })
}

fn run_repeat(
    config: &RunConfig,
    data: &Dataset,
    run_dir: &Path,
    repeat: usize,
) -> Result<RepeatRow, CliError> {
    let run_seed = config.seed.wrapping_add((repeat - 1) as u64);
    let split_seed = if config.freeze_split {
        config.seed
    } else {
        run_seed
    };
    let split = split_by_user(data, &config.split_spec(split_seed))?;
    let spec = config.classifier_spec(data.feature_dim());
    let base = config.train_config();

    let suite = build_suite(
        config,
        &split.train,
        &split.validation,
        &spec,
        &base,
        run_seed,
    )?;
    if repeat == 1 {
        suite.save(&run_dir.join("suite"))?;
    }

    let policy = config.policy();
    let preds = suite.predict_batch(split.test.samples(), &policy)?;
    let labels: Vec<Label> = split.test.samples().iter().map(|s| s.label).collect();
    let ids: Vec<String> = split.test.samples().iter().map(|s| s.id.clone()).collect();
    let report = evaluate(&preds, &labels, &ids)?;

    let repeat_dir = run_dir.join("repeats").join(format!("repeat_{repeat:02}"));
    write_repeat_artifacts(config, &repeat_dir, &report, &ids, &preds, &labels)?;

    Ok((
        repeat,
        report.roc.auc,
        report.sensitivity,
        report.specificity,
    ))
}

/// Trains the strategy's model(s) as a suite. Single-model strategies
/// become one-unit suites on a one-bag plan: the balancing draw uses
/// the bag stream and the unit trains with the bag's unit seed.
fn build_suite(
    config: &RunConfig,
    train_set: &Dataset,
    validation: &Dataset,
    spec: &ClassifierSpec,
    base: &TrainConfig,
    run_seed: u64,
) -> Result<EnsembleSuite, CliError> {
    if config.strategy == Strategy::Ensemble {
        let plan = config.bag_plan(run_seed);
        return Ok(train_suite(train_set, validation, &plan, spec, base)?);
    }
    let plan = BagPlan {
        n_bags: 1,
        seed: run_seed,
    };
    let balanced: Option<Dataset> = match config.strategy {
        Strategy::SingleImbalanced => None,
        Strategy::DownSample => Some(down_sample(train_set, derive_seed(run_seed, 1))?),
        Strategy::Smote => Some(smote_upsample(
            train_set,
            DEFAULT_SMOTE_NEIGHBORS,
            derive_seed(run_seed, 1),
        )?),
        Strategy::Ensemble => unreachable!("handled above"),
    };
    let effective_train = balanced.as_ref().unwrap_or(train_set);
    let unit_config = TrainConfig {
        seed: unit_seed(&plan, 1),
        ..*base
    };
    let unit = train(
        spec,
        &unit_config,
        effective_train.samples(),
        validation.samples(),
    )?;
    let bag_ids = effective_train
        .samples()
        .iter()
        .map(|s| s.id.clone())
        .collect();
    Ok(EnsembleSuite::from_parts(vec![unit], plan, vec![bag_ids])?)
}

fn write_repeat_artifacts(
    config: &RunConfig,
    dir: &Path,
    report: &EvaluationReport,
    ids: &[String],
    preds: &[Prediction],
    labels: &[Label],
) -> Result<(), CliError> {
    write_atomic(
        &dir.join("report.json"),
        &serde_json::to_vec_pretty(report).expect("report serializes"),
    )?;
    write_atomic(&dir.join("metrics.csv"), metrics_csv(report).as_bytes())?;
    write_atomic(&dir.join("roc.csv"), roc_csv(&report.roc).as_bytes())?;
    write_atomic(
        &dir.join("referral_threshold.csv"),
        referral_csv(&report.referral_by_threshold, "sigma_threshold").as_bytes(),
    )?;
    write_atomic(
        &dir.join("referral_fraction.csv"),
        referral_csv(&report.referral_by_fraction, "retained_fraction").as_bytes(),
    )?;
    write_atomic(
        &dir.join("uncertainty_hist.csv"),
        histogram_csv(&report.uncertainty_correct, &report.uncertainty_incorrect).as_bytes(),
    )?;
    write_atomic(
        &dir.join("predictions.csv"),
        predictions_csv(ids, preds).as_bytes(),
    )?;

    if config.strategy == Strategy::Ensemble && !preds.is_empty() {
        // Per-unit discrimination: unit u's score for sample i is
        // preds[i].unit_probs[u].
        let n_units = preds[0].unit_probs.len();
        let mut aucs = Vec::with_capacity(n_units);
        let mut curves = Vec::with_capacity(n_units);
        for u in 0..n_units {
            let scores: Vec<f64> = preds.iter().map(|p| p.unit_probs[u]).collect();
            let roc = roc_auc(&scores, labels)?;
            aucs.push(roc.auc);
            curves.push(roc);
        }
        write_atomic(&dir.join("unit_auc.csv"), unit_auc_csv(&aucs).as_bytes())?;
        write_atomic(
            &dir.join("unit_roc_points.csv"),
            unit_roc_points_csv(&curves).as_bytes(),
        )?;
    }

    if config.emit_plots {
        let roc_series = vec![
            Series {
                name: "chance".into(),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
            },
            Series {
                name: "model".into(),
                points: report.roc.points.clone(),
            },
        ];
        write_atomic(
            &dir.join("roc.svg"),
            line_chart(
                "ROC",
                "false positive rate",
                "true positive rate",
                &roc_series,
            )
            .as_bytes(),
        )?;
        let threshold_series = Series {
            name: "retained AUC".into(),
            points: report
                .referral_by_threshold
                .entries
                .iter()
                .filter_map(|e| e.auc.map(|a| (e.key, a)))
                .collect(),
        };
        write_atomic(
            &dir.join("referral_threshold.svg"),
            line_chart(
                "Retained AUC vs sigma cutoff",
                "sigma threshold",
                "AUC",
                &[threshold_series],
            )
            .as_bytes(),
        )?;
        let hist = &report.uncertainty_correct;
        let bins: Vec<(f64, f64, f64)> = hist
            .masses
            .iter()
            .zip(&report.uncertainty_incorrect.masses)
            .enumerate()
            .map(|(k, (c, i))| (hist.bin_start(k), *c, *i))
            .collect();
        write_atomic(
            &dir.join("uncertainty_hist.svg"),
            paired_bar_chart(
                "Uncertainty by correctness",
                "sigma",
                "mass",
                &bins,
                "correct",
                "incorrect",
            )
            .as_bytes(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use balsa::dataset::{generate_synthetic, save_tabular};
    use balsa::SyntheticConfig;
    use std::fs;

    fn small_table(dir: &Path, positive: usize, healthy: usize, seed: u64) -> PathBuf {
        let data = generate_synthetic(&SyntheticConfig {
            positive_users: positive,
            healthy_users: healthy,
            min_samples_per_user: 1,
            max_samples_per_user: 2,
            feature_dim: 5,
            separation: 2.0,
            seed,
        })
        .unwrap();
        let path = dir.join("data.csv");
        save_tabular(&data, &path).unwrap();
        path
    }

    fn quick_config(dir: &Path, dataset: PathBuf, strategy: Strategy) -> RunConfig {
        let mut config = RunConfig {
            dataset: Some(dataset),
            output_dir: dir.join("runs"),
            strategy,
            n_repeats: 2,
            seed: 40,
            ..RunConfig::default()
        };
        config.bags.n_bags = 3;
        config.classifier.kind = crate::config::ClassifierKindConfig::Logistic;
        config.training.learning_rate = 1e-3;
        config.training.max_epochs = 8;
        config
    }

    #[test]
    fn experiment_writes_repeat_artifacts_and_aggregate() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = small_table(dir.path(), 10, 24, 17);
        let config = quick_config(dir.path(), dataset, Strategy::Ensemble);
        let outcome = run(&config).unwrap();

        let run_dir = &outcome.run_dir;
        assert_eq!(run_dir.file_name().unwrap(), "run_01");
        for name in [
            "config.effective.toml",
            "aggregate.json",
            "aggregate.csv",
            "summary.csv",
            "manifest.json",
            "suite/suite.json",
            "repeats/repeat_01/metrics.csv",
            "repeats/repeat_01/roc.csv",
            "repeats/repeat_01/report.json",
            "repeats/repeat_01/referral_threshold.csv",
            "repeats/repeat_01/referral_fraction.csv",
            "repeats/repeat_01/uncertainty_hist.csv",
            "repeats/repeat_01/predictions.csv",
            "repeats/repeat_01/unit_auc.csv",
            "repeats/repeat_02/metrics.csv",
        ] {
            assert!(run_dir.join(name).exists(), "missing {name}");
        }
        assert!(!run_dir.join("FAILED.txt").exists());
        assert_eq!(outcome.aggregate.n_repeats, 2);
        let summary = fs::read_to_string(run_dir.join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 3);
    }

    #[test]
    fn single_strategies_produce_one_unit_suites() {
        for strategy in [
            Strategy::SingleImbalanced,
            Strategy::DownSample,
            Strategy::Smote,
        ] {
            let dir = tempfile::tempdir().unwrap();
            let dataset = small_table(dir.path(), 8, 20, 29);
            let mut config = quick_config(dir.path(), dataset, strategy);
            config.n_repeats = 1;
            let outcome = run(&config).unwrap();
            let suite = EnsembleSuite::load(&outcome.run_dir.join("suite")).unwrap();
            assert_eq!(suite.n_units(), 1);
            assert!(
                !outcome
                    .run_dir
                    .join("repeats/repeat_01/unit_auc.csv")
                    .exists(),
                "per-unit tables are ensemble-only"
            );
        }
    }

    #[test]
    fn single_repeat_aggregate_has_zero_std() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = small_table(dir.path(), 9, 22, 31);
        let mut config = quick_config(dir.path(), dataset, Strategy::DownSample);
        config.n_repeats = 1;
        let outcome = run(&config).unwrap();
        assert_eq!(outcome.aggregate.auc.std, 0.0);
        let text = fs::read_to_string(outcome.run_dir.join("aggregate.csv")).unwrap();
        for line in text.lines().skip(1) {
            assert!(line.ends_with(",0"), "std column must be exactly 0: {line}");
        }
    }

    #[test]
    fn failed_repeat_leaves_marker_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        // More positive than healthy users: balanced bags cannot draw
        // enough distinct healthy users, so training fails.
        let dataset = small_table(dir.path(), 12, 4, 13);
        let config = quick_config(dir.path(), dataset, Strategy::Ensemble);
        let err = run(&config).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_DATA);

        let run_dir = dir.path().join("runs").join("run_01");
        let marker = fs::read_to_string(run_dir.join("FAILED.txt")).unwrap();
        assert!(marker.contains("repeat 1 failed"));
        assert!(run_dir.join("manifest.json").exists());
        assert!(run_dir.join("config.effective.toml").exists());
    }

    #[test]
    fn missing_dataset_path_is_a_usage_error() {
        let config = RunConfig::default();
        let err = run(&config).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
    }

    #[test]
    fn identical_configs_give_identical_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = small_table(dir.path(), 10, 24, 43);
        let config = quick_config(dir.path(), dataset, Strategy::Ensemble);
        let first = run(&config).unwrap();
        let second = run(&config).unwrap();
        assert_ne!(first.run_dir, second.run_dir);
        for name in [
            "aggregate.csv",
            "summary.csv",
            "repeats/repeat_01/metrics.csv",
            "repeats/repeat_02/predictions.csv",
        ] {
            let a = fs::read(first.run_dir.join(name)).unwrap();
            let b = fs::read(second.run_dir.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn frozen_split_reuses_the_base_split() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = small_table(dir.path(), 10, 24, 47);
        let mut config = quick_config(dir.path(), dataset, Strategy::DownSample);
        config.freeze_split = true;
        let outcome = run(&config).unwrap();
        // Same users tested in both repeats: the prediction id column
        // is identical.
        let ids = |n: &str| -> Vec<String> {
            fs::read_to_string(outcome.run_dir.join(n))
                .unwrap()
                .lines()
                .skip(1)
                .map(|l| l.split(',').next().unwrap().to_string())
                .collect()
        };
        assert_eq!(
            ids("repeats/repeat_01/predictions.csv"),
            ids("repeats/repeat_02/predictions.csv")
        );
    }
}
