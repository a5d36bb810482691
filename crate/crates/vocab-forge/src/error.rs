use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type with stable machine-readable codes.
///
/// Every variant maps to a fixed code string via [`Error::code`]; the CLI
/// surfaces these codes in its JSON error output, so variants must not be
/// renamed without a compatibility note.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-positive size for language '{0}'")]
    NonPositiveSize(String),

    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("target vocabulary size {target} is smaller than specials + alphabet ({floor})")]
    TargetTooSmall { target: usize, floor: usize },

    #[error("token id {id} out of range for vocabulary of size {len}")]
    IdOutOfRange { id: u32, len: usize },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("strategy requires auxiliary embeddings but none were supplied")]
    MissingAux,

    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,

    #[error("no overlapping token has an auxiliary vector; focus initialization impossible")]
    NoOverlapSupport,

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("bad magic in {0}: not an embedding container")]
    BadMagic(PathBuf),

    #[error("corrupt payload in {path}: {reason}")]
    CorruptPayload { path: PathBuf, reason: String },

    #[error("non-finite value at row {row}, column {col}; refusing to serialize")]
    NonFinite { row: usize, col: usize },

    #[error("hash mismatch for '{role}' ({path}): manifest {expected}, file {actual}")]
    HashMismatch {
        role: String,
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable code string for scripting against CLI error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyInput(_) => "EmptyInput",
            Error::NonPositiveSize(_) => "NonPositiveSize",
            Error::InvalidAlpha(_) => "InvalidAlpha",
            Error::EmptyCorpus(_) => "EmptyCorpus",
            Error::TargetTooSmall { .. } => "TargetTooSmall",
            Error::IdOutOfRange { .. } => "IdOutOfRange",
            Error::DimMismatch(_) => "DimMismatch",
            Error::MissingAux => "MissingAux",
            Error::ZeroVector => "ZeroVector",
            Error::NoOverlapSupport => "NoOverlapSupport",
            Error::Format { .. } => "FormatError",
            Error::BadMagic(_) => "BadMagic",
            Error::CorruptPayload { .. } => "CorruptPayload",
            Error::NonFinite { .. } => "NonFinite",
            Error::HashMismatch { .. } => "HashMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
