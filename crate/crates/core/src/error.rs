use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: schema violation: {message}")]
    Schema { path: PathBuf, message: String },

    /// A type invariant failed. `joint` is 1-based when present.
    #[error("invalid {field}{}: {message}", joint_suffix(*.joint, .name.as_deref()))]
    Invariant {
        field: &'static str,
        joint: Option<usize>,
        name: Option<String>,
        message: String,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("episode finished: step called after done")]
    EpisodeDone,
}

fn joint_suffix(joint: Option<usize>, name: Option<&str>) -> String {
    match (joint, name) {
        (Some(j), Some(n)) => format!(" for joint {j} ({n})"),
        (Some(j), None) => format!(" for joint {j}"),
        _ => String::new(),
    }
}

impl Error {
    pub(crate) fn invariant(field: &'static str, message: impl Into<String>) -> Self {
        Error::Invariant {
            field,
            joint: None,
            name: None,
            message: message.into(),
        }
    }

    /// `index` is 0-based; the message reports it 1-based.
    pub(crate) fn joint_invariant(
        field: &'static str,
        index: usize,
        name: &str,
        message: impl Into<String>,
    ) -> Self {
        Error::Invariant {
            field,
            joint: Some(index + 1),
            name: Some(name.to_owned()),
            message: message.into(),
        }
    }

    pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Dimension {
                context,
                expected,
                actual,
            })
        }
    }

    /// True for errors that stem from the filesystem rather than content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub(crate) fn check_finite(context: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}
