//! Library side of the `basket` command-line tool: configuration files, output tables,
//! manifests and the subcommands themselves.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod tables;

pub use error::{CliError, Result};
