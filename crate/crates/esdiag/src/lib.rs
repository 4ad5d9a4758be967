//! File formats, run configuration and the `esdiag` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use cli::run;
pub use error::CliError;
