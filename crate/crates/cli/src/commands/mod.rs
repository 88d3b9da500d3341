//! One module per subcommand. Each `run` takes a plain options struct
//! so tests can drive commands without spawning the binary.

pub mod experiment;
pub mod predict;
pub mod preprocess;
pub mod sweep;
pub mod synth;
