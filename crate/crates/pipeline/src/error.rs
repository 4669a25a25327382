use std::path::PathBuf;

use crate::artifacts::Stage;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tabdisc_core::Error),
    #[error(transparent)]
    Model(#[from] tabdisc_model::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage `{stage}` artifact {file} failed checksum verification")]
    Checksum { stage: Stage, file: String },
    #[error("artifacts not ready: {0}")]
    NotReady(String),
    #[error("stage `{stage}` failed: {source} (partial artifacts: {})", partial_list(.partial))]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
        partial: Vec<String>,
    },
}

fn partial_list(files: &[String]) -> String {
    if files.is_empty() {
        "none".into()
    } else {
        files.join(", ")
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The stage a failure is attributed to, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Checksum { stage, .. } | Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
