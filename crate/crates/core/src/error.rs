use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid video metadata: {0}")]
    InvalidVideo(String),

    #[error("invalid operation: {0}")]
    InvalidOperation(String),

    #[error("task id `{0}` is already admitted")]
    DuplicateTaskId(String),

    #[error("invalid merge group: {0}")]
    InvalidGroup(String),

    #[error("arithmetic overflow while {0}")]
    Overflow(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}line {line}: {message}", path_prefix(.path))]
    Parse {
        path: Option<PathBuf>,
        line: u64,
        message: String,
    },

    #[error("{}line {line}: target {value} outside [0, 1]", path_prefix(.path))]
    TargetRange {
        path: Option<PathBuf>,
        line: u64,
        value: f64,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("feature count mismatch: expected {expected}, got {actual}")]
    FeatureMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },

    #[error("unsupported model file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("sweep grid point {point}: {source}")]
    Sweep {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn path_prefix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line,
            message: message.into(),
        }
    }

    /// Attach a file path to line-oriented errors.
    pub(crate) fn at_path(self, p: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                path: Some(p.into()),
                line,
                message,
            },
            Error::TargetRange { line, value, .. } => Error::TargetRange {
                path: Some(p.into()),
                line,
                value,
            },
            other => other,
        }
    }
}
