//! Command-line workbench around the `balsa` library.
//!
//! The binary (`balsa`) exposes five subcommands: `preprocess` turns a
//! clip manifest into a fused feature table, `synth` generates labeled
//! synthetic tables, `experiment` runs repeated train/evaluate cycles
//! for one balancing strategy, `predict` scores a table with a saved
//! suite, and `referral-sweep` recomputes referral curves for a saved
//! suite. Everything the binary does lives in this library so
//! integration tests can call the same code paths directly.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod report;
pub mod runs;

pub use config::{RunConfig, Strategy};
pub use error::{CliError, EXIT_DATA, EXIT_TRAIN, EXIT_USAGE};
