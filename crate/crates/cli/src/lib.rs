//! Configuration loading and experiment orchestration behind the `dgtnash`
//! binary.

pub mod config;
pub mod error;
pub mod experiment;

pub use config::{load_config, parse_config, RunConfig};
pub use error::CliError;
