//! Command-line orchestration of the keyword ranking pipeline:
//! `pseudo-label`, `train`, `evaluate`, `run-all`, plus the `theory-check`
//! identity suite and the `gap-sweep` experiment.

pub mod commands;
pub mod config;
pub mod error;

pub use config::PipelineConfig;
pub use error::CliError;
