//! Command-line driver for the qsphere experiments: one subcommand per
//! experiment, JSON or CSV output, fixed seeds, and the acceptance report.

pub mod acceptance;
pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod tolerances;

pub use config::{Format, RunConfig};
pub use error::{CliError, ExitStatus};
pub use output::Report;

/// Version tag written as the top-level `"schema"` key of every document.
pub const SCHEMA: &str = "qsphere/1";

/// Environment variable capping the size of the worker pool.
pub const THREADS_ENV: &str = "QSPHERE_THREADS";
