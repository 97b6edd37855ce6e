use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible scene spec: {0}")]
    Infeasible(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{0} is not implemented")]
    NotImplemented(String),

    #[error("no predictions stored for frame {0}")]
    MissingPrediction(u32),

    #[error("unknown frame id {0}")]
    UnknownFrame(u32),

    #[error("invalid depth evaluation input: {0}")]
    Depth(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: already exists (pass --force to overwrite)")]
    AlreadyExists { path: PathBuf },

    #[error("{path}: parse error at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("{path}: unsupported {kind} schema version {found} (this build reads version {supported})")]
    SchemaVersion {
        path: PathBuf,
        kind: &'static str,
        found: u32,
        supported: u32,
    },

    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("frame {frame}: invalid {field}: {message}")]
    Invariant {
        frame: usize,
        field: String,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 = configuration or usage error, 3 = I/O or file-format error,
    /// 4 = numeric failure, 1 = anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Infeasible(_) | Error::NotImplemented(_) => 2,
            Error::Io { .. }
            | Error::AlreadyExists { .. }
            | Error::Parse { .. }
            | Error::SchemaVersion { .. }
            | Error::Corrupt { .. }
            | Error::Invariant { .. } => 3,
            Error::Numeric(_) => 4,
            _ => 1,
        }
    }
}
