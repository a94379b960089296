use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Broad failure category, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    Protocol,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{axis} of {size} is not divisible by factor {factor}")]
    NotDivisible {
        axis: &'static str,
        size: usize,
        factor: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}", path = .path.display())]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: unsupported format version {found}, expected {expected}", path = .path.display())]
    UnsupportedVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: truncated ({detail})", path = .path.display())]
    Truncated { path: PathBuf, detail: String },

    #[error("{path}: {detail}", path = .path.display())]
    Format { path: PathBuf, detail: String },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("index {index} out of range for dataset of {len} cases")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{path}: {source}", path = .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("eigen solver did not converge after {sweeps} sweeps (off-diagonal {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("external classifier: {0}")]
    Protocol(String),

    #[error("stage {stage} (factor {factor}): {source}")]
    Stage {
        stage: usize,
        factor: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("case {index}: {source}")]
    Case {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Numeric(_) | Error::NoConvergence { .. } | Error::UndefinedCorrelation(_) => {
                ErrorKind::Numeric
            }
            Error::Protocol(_) => ErrorKind::Protocol,
            Error::Stage { source, .. } | Error::Case { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
