//! `balsa referral-sweep`: recompute referral curves for a saved suite
//! on a labeled table, without retraining anything.
//!
//! Two complementary sweeps are written: retained-set quality as a
//! function of the sigma cutoff, and as a function of the retained
//! fraction (lowest-sigma samples kept first). The uncertainty
//! histograms split by correctness round out the picture.

use std::path::{Path, PathBuf};

use balsa::dataset::{load_tabular, TabularSchema};
use balsa::metrics::{
    default_fraction_grid, default_threshold_grid, referral_by_fraction, referral_by_threshold,
    uncertainty_split,
};
use balsa::{EnsembleSuite, Label, ReferralPolicy};

use crate::config::ConfigError;
use crate::error::CliError;
use crate::plot::{line_chart, paired_bar_chart, Series};
use crate::report::{histogram_csv, predictions_csv, referral_csv};
use crate::runs::{next_run_dir, sha256_hex, write_atomic, write_manifest};

#[derive(Debug, Clone)]
pub struct SweepOpts {
    pub suite: PathBuf,
    pub data: PathBuf,
    pub output_dir: PathBuf,
    pub bin_width: f64,
    pub emit_plots: bool,
}

pub fn run(opts: &SweepOpts) -> Result<PathBuf, CliError> {
    if !(opts.bin_width.is_finite() && opts.bin_width > 0.0 && opts.bin_width <= 0.5) {
        return Err(ConfigError::Invalid(format!(
            "bin_width must be in (0, 0.5], got {}",
            opts.bin_width
        ))
        .into());
    }

    let suite = EnsembleSuite::load(&opts.suite)?;
    let data = load_tabular(&opts.data, &TabularSchema::default())?;
    let preds = suite.predict_batch(data.samples(), &ReferralPolicy::default())?;
    let labels: Vec<Label> = data.samples().iter().map(|s| s.label).collect();
    let ids: Vec<String> = data.samples().iter().map(|s| s.id.clone()).collect();

    let by_threshold = referral_by_threshold(&preds, &labels, &default_threshold_grid())?;
    let by_fraction = referral_by_fraction(&preds, &labels, &ids, &default_fraction_grid())?;
    let (correct, incorrect) = uncertainty_split(&preds, &labels, opts.bin_width)?;

    let run_dir = next_run_dir(&opts.output_dir, "sweep")?;
    // The sweep's effective config, for the manifest hash.
    let effective = format!(
        "suite = {:?}\ndata = {:?}\nbin_width = {}\n",
        opts.suite.display().to_string(),
        opts.data.display().to_string(),
        opts.bin_width
    );
    write_atomic(&run_dir.join("config.effective.toml"), effective.as_bytes())?;
    write_atomic(
        &run_dir.join("referral_threshold.csv"),
        referral_csv(&by_threshold, "sigma_threshold").as_bytes(),
    )?;
    write_atomic(
        &run_dir.join("referral_fraction.csv"),
        referral_csv(&by_fraction, "retained_fraction").as_bytes(),
    )?;
    write_atomic(
        &run_dir.join("uncertainty_hist.csv"),
        histogram_csv(&correct, &incorrect).as_bytes(),
    )?;
    write_atomic(
        &run_dir.join("predictions.csv"),
        predictions_csv(&ids, &preds).as_bytes(),
    )?;

    if opts.emit_plots {
        let threshold_series = Series {
            name: "retained AUC".into(),
            points: by_threshold
                .entries
                .iter()
                .filter_map(|e| e.auc.map(|a| (e.key, a)))
                .collect(),
        };
        write_atomic(
            &run_dir.join("referral_threshold.svg"),
            line_chart(
                "Retained AUC vs sigma cutoff",
                "sigma threshold",
                "AUC",
                &[threshold_series],
            )
            .as_bytes(),
        )?;
        let bins: Vec<(f64, f64, f64)> = correct
            .masses
            .iter()
            .zip(&incorrect.masses)
            .enumerate()
            .map(|(k, (c, i))| (correct.bin_start(k), *c, *i))
            .collect();
        write_atomic(
            &run_dir.join("uncertainty_hist.svg"),
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

    let inputs = sweep_inputs(&opts.suite, &opts.data)?;
    write_manifest(
        &run_dir,
        "referral-sweep",
        &sha256_hex(effective.as_bytes()),
        &inputs,
    )?;
    println!("sweep directory: {}", run_dir.display());
    Ok(run_dir)
}

/// The input set is the data table plus every file of the saved suite.
fn sweep_inputs(suite: &Path, data: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut inputs = vec![data.to_path_buf()];
    let mut stack = vec![suite.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(crate::error::io_context(format!(
            "cannot list {}",
            dir.display()
        )))?;
        for entry in entries {
            let entry = entry.map_err(crate::error::io_context(format!(
                "cannot list {}",
                dir.display()
            )))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                inputs.push(path);
            }
        }
    }
    inputs.sort();
    Ok(inputs)
}
