use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] jointgap::Error),

    /// A core error raised while reading a specific input file.
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: jointgap::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 0 success, 1 validation error, 2 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Core(e) | CliError::InFile { source: e, .. } if e.is_io() => 2,
            _ => 1,
        }
    }

    /// The message on a single line, prefixed for grepping.
    pub fn message_line(&self) -> String {
        let text = self.to_string();
        let flat: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        format!("error: {}", flat.join(" "))
    }

    pub(crate) fn in_file(path: impl Into<PathBuf>) -> impl FnOnce(jointgap::Error) -> CliError {
        let path = path.into();
        move |source| {
            if source.is_io() {
                CliError::Core(source)
            } else {
                CliError::InFile { path, source }
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
