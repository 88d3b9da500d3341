//! `balsa predict`: score a feature table with a saved suite. Emits one
//! CSV row per sample with the fused probability, the ensemble
//! disagreement, the decision, and whether the sample should be
//! referred instead of trusted.

use std::path::PathBuf;

use balsa::dataset::{load_tabular, TabularSchema};
use balsa::{EnsembleSuite, ReferralPolicy};

use crate::config::ConfigError;
use crate::error::CliError;
use crate::report::predictions_csv;
use crate::runs::write_atomic;

#[derive(Debug, Clone)]
pub struct PredictOpts {
    pub suite: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    /// Overrides the default referral threshold when set.
    pub sigma_threshold: Option<f64>,
}

pub fn run(opts: &PredictOpts) -> Result<(), CliError> {
    let mut policy = ReferralPolicy::default();
    if let Some(sigma) = opts.sigma_threshold {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "sigma_threshold must be finite and nonnegative, got {sigma}"
            ))
            .into());
        }
        policy.sigma_threshold = sigma;
    }

    let suite = EnsembleSuite::load(&opts.suite)?;
    let data = load_tabular(&opts.data, &TabularSchema::default())?;
    let preds = suite.predict_batch(data.samples(), &policy)?;
    let ids: Vec<String> = data.samples().iter().map(|s| s.id.clone()).collect();
    write_atomic(&opts.out, predictions_csv(&ids, &preds).as_bytes())?;

    let referred = preds.iter().filter(|p| p.referred).count();
    println!(
        "scored {} samples ({} referred at sigma > {}) to {}",
        preds.len(),
        referred,
        policy.sigma_threshold,
        opts.out.display()
    );
    Ok(())
}
