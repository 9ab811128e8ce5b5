//! Experiment driver for IGA/rIGA Laplace eigenproblem sweeps.
//!
//! A sweep is the cross product of degrees and partitioning levels at fixed
//! `d` and `ne`. Each point writes its spectrum, error table and cost report,
//! and the whole sweep writes a symbolic FLOP table and a checksummed
//! manifest.

pub mod config;
mod error;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, FileConfig, Overrides, Request};
pub use error::CliError;
pub use output::OutputBundle;
pub use run::run_experiment;
