use std::error::Error as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use balsa_cli::commands::{experiment, predict, preprocess, sweep, synth};
use balsa_cli::config::{ClassifierKindConfig, RunConfig, Strategy};
use balsa_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "balsa",
    version,
    about = "Uncertainty-aware screening ensembles for imbalanced audio datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a clip manifest into a fused feature table.
    Preprocess(PreprocessArgs),
    /// Generate a synthetic labeled feature table.
    Synth(SynthArgs),
    /// Run repeated train/evaluate cycles for one strategy.
    Experiment(Box<ExperimentArgs>),
    /// Score a feature table with a saved suite.
    Predict(PredictArgs),
    /// Recompute referral curves for a saved suite.
    ReferralSweep(SweepArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// CSV manifest with columns id,user_id,label,breathing,cough,speech.
    #[arg(long)]
    manifest: PathBuf,
    /// Feature table to write; a status log lands next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Feature table to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    positive_users: usize,
    #[arg(long, default_value_t = 200)]
    healthy_users: usize,
    #[arg(long, default_value_t = 1)]
    min_samples_per_user: usize,
    #[arg(long, default_value_t = 5)]
    max_samples_per_user: usize,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
    /// Class separation in feature space; higher is easier.
    #[arg(long, default_value_t = 1.2)]
    separation: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature table used for training and evaluation.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Parent directory that receives numbered run directories.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Balancing strategy: single_imbalanced, down_sample, smote, or ensemble.
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    #[arg(long)]
    n_repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reuse the base seed's split in every repeat.
    #[arg(long)]
    freeze_split: bool,
    /// Also render SVG charts next to the CSV tables.
    #[arg(long)]
    plots: bool,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    n_bags: Option<usize>,
    /// Classifier kind: mlp_head or logistic.
    #[arg(long, value_parser = parse_kind)]
    classifier: Option<ClassifierKindConfig>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    sigma_threshold: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    /// Directory of a saved suite.
    #[arg(long)]
    suite: PathBuf,
    /// Feature table to score.
    #[arg(long)]
    data: PathBuf,
    /// Prediction CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Referral threshold override.
    #[arg(long)]
    sigma_threshold: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Directory of a saved suite.
    #[arg(long)]
    suite: PathBuf,
    /// Labeled feature table to sweep on.
    #[arg(long)]
    data: PathBuf,
    /// Parent directory that receives numbered sweep directories.
    #[arg(long)]
    output_dir: PathBuf,
    /// Histogram bin width over sigma.
    #[arg(long, default_value_t = balsa::metrics::DEFAULT_HISTOGRAM_BIN_WIDTH)]
    bin_width: f64,
    /// Also render SVG charts next to the CSV tables.
    #[arg(long)]
    plots: bool,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<ClassifierKindConfig, String> {
    s.parse()
}

/// Precedence: defaults, then the file, then flags.
fn resolve_config(args: &ExperimentArgs) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.dataset {
        config.dataset = Some(v.clone());
    }
    if let Some(v) = &args.output_dir {
        config.output_dir = v.clone();
    }
    if let Some(v) = args.strategy {
        config.strategy = v;
    }
    if let Some(v) = args.n_repeats {
        config.n_repeats = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if args.freeze_split {
        config.freeze_split = true;
    }
    if args.plots {
        config.emit_plots = true;
    }
    if let Some(v) = args.validation_fraction {
        config.split.validation_fraction = v;
    }
    if let Some(v) = args.test_fraction {
        config.split.test_fraction = v;
    }
    if let Some(v) = args.n_bags {
        config.bags.n_bags = v;
    }
    if let Some(v) = args.classifier {
        config.classifier.kind = v;
    }
    if let Some(v) = args.hidden_units {
        config.classifier.hidden_units = Some(v);
    }
    if let Some(v) = args.learning_rate {
        config.training.learning_rate = v;
    }
    if let Some(v) = args.lr_decay {
        config.training.lr_decay = v;
    }
    if let Some(v) = args.batch_size {
        config.training.batch_size = v;
    }
    if let Some(v) = args.max_epochs {
        config.training.max_epochs = v;
    }
    if let Some(v) = args.patience {
        config.training.patience = v;
    }
    if let Some(v) = args.sigma_threshold {
        config.referral.sigma_threshold = v;
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Preprocess(args) => preprocess::run(&preprocess::PreprocessOpts {
            manifest: args.manifest,
            out: args.out,
        }),
        Command::Synth(args) => synth::run(&synth::SynthOpts {
            out: args.out,
            positive_users: args.positive_users,
            healthy_users: args.healthy_users,
            min_samples_per_user: args.min_samples_per_user,
            max_samples_per_user: args.max_samples_per_user,
            feature_dim: args.feature_dim,
            separation: args.separation,
            seed: args.seed,
        }),
        Command::Experiment(args) => {
            let config = resolve_config(&args)?;
            experiment::run(&config).map(|_| ())
        }
        Command::Predict(args) => predict::run(&predict::PredictOpts {
            suite: args.suite,
            data: args.data,
            out: args.out,
            sigma_threshold: args.sigma_threshold,
        }),
        Command::ReferralSweep(args) => sweep::run(&sweep::SweepOpts {
            suite: args.suite,
            data: args.data,
            output_dir: args.output_dir,
            bin_width: args.bin_width,
            emit_plots: args.plots,
        })
        .map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = err.source();
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
