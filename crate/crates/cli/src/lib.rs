//! Command-line harness for the Lagrangian solver: configured experiments,
//! reproducible artifacts, run comparison and named suites.

pub mod artifacts;
pub mod compare;
pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod suites;

use std::path::Path;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

/// Runs one experiment and writes its artifacts to `out`. Returns the exit
/// code and the error behind it, if any.
pub fn run(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<(i32, Option<CliError>)> {
    cfg.validate()?;
    artifacts::persist(out, cfg, threads, experiments::execute(cfg))
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
