use std::path::PathBuf;

/// Errors raised by the core crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("collection contains no tables")]
    EmptyCollection,
    #[error("duplicate table id `{0}`")]
    DuplicateTableId(String),
    #[error("table `{0}` has no cells")]
    EmptyTable(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("checksum mismatch for {file}")]
    Checksum { file: String },
    #[error("unsupported format: {0}")]
    Format(String),
    #[error("sql generation exhausted after {attempts} attempts with {accepted} of {requested} queries")]
    Exhausted {
        attempts: usize,
        accepted: usize,
        requested: usize,
        partial: Vec<crate::sqlgen::SqlQuery>,
    },
    #[error("not enough training questions: need {needed}, have {available} ({missing} missing)")]
    Shortfall {
        needed: usize,
        available: usize,
        missing: usize,
    },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown triple {0:#018x}")]
    UnknownTriple(u64),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
