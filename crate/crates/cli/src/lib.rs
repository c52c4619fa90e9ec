//! Library side of the `nevo` command: configuration parsing, task and
//! policy construction, and the `train`, `test` and `render` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod setup;

pub use config::{parse_config, parse_config_str, Config, TaskName};
pub use error::{CliError, CliResult, ConfigError};
