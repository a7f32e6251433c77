//! Command-line front end: configuration, run directories and the
//! subcommand implementations behind the `herding` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod validate;

pub use error::CliError;
