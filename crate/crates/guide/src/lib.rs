//! The guide's chapters live in `book/src/` as mdbook markdown.
//! mdbook cannot compile examples against this workspace, so each
//! chapter is also included here as a module's documentation and
//! `cargo test --doc -p balsa-guide` runs every fenced Rust block as
//! a doctest. One module per chapter keeps failures attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data-model.md")]
pub mod data_model {}

#[doc = include_str!("../../../book/src/audio-front-end.md")]
pub mod audio_front_end {}

#[doc = include_str!("../../../book/src/balancing.md")]
pub mod balancing {}

#[doc = include_str!("../../../book/src/classifiers.md")]
pub mod classifiers {}

#[doc = include_str!("../../../book/src/ensembles.md")]
pub mod ensembles {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli-workbench.md")]
pub mod cli_workbench {}

#[doc = include_str!("../../../book/src/file-formats.md")]
pub mod file_formats {}
