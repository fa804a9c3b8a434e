use std::path::PathBuf;

use thiserror::Error;

/// A value broke one of its type invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invariant violated at `{field}`: {reason}")]
pub struct InvariantViolation {
    pub field: String,
    pub reason: String,
}

impl InvariantViolation {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
}

impl ConfigError {
    pub(crate) fn from_toml(src: &str, err: toml::de::Error) -> Self {
        let line = err
            .span()
            .map(|span| src[..span.start.min(src.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        ConfigError::Parse {
            line,
            message: err.message().to_string(),
        }
    }
}
