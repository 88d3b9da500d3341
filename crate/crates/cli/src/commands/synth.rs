//! `balsa synth`: write a synthetic labeled feature table, mainly for
//! smoke tests and strategy comparisons without real recordings.

use std::path::PathBuf;

use balsa::dataset::{generate_synthetic, save_tabular};
use balsa::SyntheticConfig;

use crate::error::CliError;
use crate::runs::write_atomic_with;

#[derive(Debug, Clone)]
pub struct SynthOpts {
    pub out: PathBuf,
    pub positive_users: usize,
    pub healthy_users: usize,
    pub min_samples_per_user: usize,
    pub max_samples_per_user: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthOpts {
    fn default() -> Self {
        SynthOpts {
            out: PathBuf::from("synthetic.csv"),
            positive_users: 50,
            healthy_users: 200,
            min_samples_per_user: 1,
            max_samples_per_user: 5,
            feature_dim: 16,
            separation: 1.2,
            seed: 7,
        }
    }
}

pub fn run(opts: &SynthOpts) -> Result<(), CliError> {
    let config = SyntheticConfig {
        positive_users: opts.positive_users,
        healthy_users: opts.healthy_users,
        min_samples_per_user: opts.min_samples_per_user,
        max_samples_per_user: opts.max_samples_per_user,
        feature_dim: opts.feature_dim,
        separation: opts.separation,
        seed: opts.seed,
    };
    let data = generate_synthetic(&config)?;
    let counts = data.class_sample_counts();
    write_atomic_with(&opts.out, |tmp| Ok(save_tabular(&data, tmp)?))?;
    println!(
        "wrote {} samples ({} positive, {} healthy, {} users) to {}",
        data.len(),
        counts.positive,
        counts.healthy,
        data.users().len(),
        opts.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use balsa::dataset::{load_tabular, TabularSchema};

    #[test]
    fn synth_writes_a_loadable_table() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOpts {
            out: dir.path().join("data.csv"),
            positive_users: 5,
            healthy_users: 9,
            min_samples_per_user: 1,
            max_samples_per_user: 2,
            feature_dim: 4,
            separation: 1.0,
            seed: 3,
        };
        run(&opts).unwrap();
        let data = load_tabular(&opts.out, &TabularSchema::default()).unwrap();
        assert_eq!(data.feature_dim(), 4);
        assert_eq!(data.users().len(), 14);
    }

    #[test]
    fn synth_rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut opts = SynthOpts {
            positive_users: 4,
            healthy_users: 6,
            feature_dim: 3,
            out: dir.path().join("a.csv"),
            ..SynthOpts::default()
        };
        run(&opts).unwrap();
        let first = std::fs::read(&opts.out).unwrap();
        opts.out = dir.path().join("b.csv");
        run(&opts).unwrap();
        let second = std::fs::read(&opts.out).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn invalid_generator_config_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOpts {
            out: dir.path().join("x.csv"),
            positive_users: 0,
            ..SynthOpts::default()
        };
        let err = run(&opts).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
    }
}
