//! Command-line front end for `jointgap`.
//!
//! Every command is a pure function of its flags, config file, input files
//! and seed; outputs are plain CSV and JSON ready for plotting.

pub mod args;
pub mod commands;
pub mod config;
mod error;

pub use args::{Cli, Command};
pub use commands::run;
pub use config::{resolve_seed, RunConfig};
pub use error::{CliError, CliResult};
