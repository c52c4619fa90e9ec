use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("syntax error on line {line}: {detail}")]
    Syntax { line: usize, detail: String },
    #[error("unknown section [{name}] on line {line}")]
    UnknownSection { line: usize, name: String },
    #[error("unknown key [{section}] {key} on line {line}")]
    UnknownKey { section: String, key: String, line: usize },
    #[error("duplicate key [{section}] {key} on lines {first} and {second}")]
    Duplicate { section: String, key: String, first: usize, second: usize },
    #[error("type mismatch for [{section}] {key} on line {line}: expected {expected}, found {value:?}")]
    Type { section: String, key: String, line: usize, value: String, expected: &'static str },
    #[error("missing required key [{section}] {key}")]
    Missing { section: String, key: String },
    #[error("invalid [{section}] {key}{}: {detail}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Invalid { section: String, key: String, line: Option<usize>, detail: String },
}

impl PartialEq for ConfigError {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ConfigError::Io { path: a, .. }, ConfigError::Io { path: b, .. }) => a == b,
            _ => self.to_string() == other.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] nevo_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = Result<T, CliError>;
