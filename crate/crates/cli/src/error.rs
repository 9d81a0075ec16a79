use std::path::PathBuf;

use ptr_accountant::PtrError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag combination or malformed input.
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Config or manifest did not match the schema; `path` locates the field.
    #[error("{origin}: at `{path}`: {message}")]
    Schema {
        origin: String,
        path: String,
        message: String,
    },

    #[error(transparent)]
    Ptr(#[from] PtrError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Ptr(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Deserializes `value`, reporting the failing field path on error.
pub fn from_value<T: serde::de::DeserializeOwned>(value: serde_json::Value, origin: &str) -> CliResult<T> {
    serde_path_to_error::deserialize(value).map_err(|e| CliError::Schema {
        origin: origin.to_string(),
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}
