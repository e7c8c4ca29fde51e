//! Error type shared by configuration validation, filter construction,
//! dataset ingestion, and filter (de)serialization.

use std::fmt;

/// Errors surfaced by the public API of this crate.
#[derive(Debug)]
pub enum HabfError {
    /// Invalid configuration: parameter out of range or an inconsistent
    /// combination of parameters.
    Config(String),
    /// A previously returned insertion plan no longer matches the current
    /// cell contents, or a commit would corrupt committed state.
    Conflict(String),
    /// A serialized filter is malformed. `offset` is the byte position at
    /// which decoding failed.
    Format { offset: usize, message: String },
    /// An underlying I/O operation failed.
    Io(std::io::Error),
    /// A dataset file is malformed. `line` is the 1-based line number of the
    /// offending record.
    Parse { line: u64, message: String },
    /// Input data violates a documented precondition (for example a key that
    /// appears in both the positive and the negative set), or a metric is
    /// undefined for the given input.
    Input(String),
}

impl fmt::Display for HabfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HabfError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            HabfError::Conflict(msg) => write!(f, "plan conflict: {msg}"),
            HabfError::Format { offset, message } => {
                write!(f, "malformed filter data at byte {offset}: {message}")
            }
            HabfError::Io(err) => write!(f, "i/o error: {err}"),
            HabfError::Parse { line, message } => {
                write!(f, "dataset parse error at line {line}: {message}")
            }
            HabfError::Input(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for HabfError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            HabfError::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for HabfError {
    fn from(err: std::io::Error) -> Self {
        HabfError::Io(err)
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, HabfError>;
