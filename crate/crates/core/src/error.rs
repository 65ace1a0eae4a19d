use std::path::PathBuf;

use thiserror::Error;

use crate::pool::AlgorithmId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {reason}: {raw:?}", file.display())]
    Malformed {
        file: PathBuf,
        line: usize,
        reason: String,
        raw: String,
    },

    #[error("rating for user {user}, item {item} references an unknown {kind}")]
    DanglingReference {
        user: u32,
        item: u32,
        kind: &'static str,
    },

    #[error("duplicate rating for user {user}, item {item}")]
    DuplicateRating { user: u32, item: u32 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    InvalidFractions(Vec<f64>),

    #[error("cannot build {k} folds from {n} indices")]
    InvalidFoldCount { k: usize, n: usize },

    #[error("{algorithm} diverged at epoch {epoch}: non-finite parameter")]
    Divergence { algorithm: AlgorithmId, epoch: usize },

    #[error("normal equations are singular (lambda = {lambda})")]
    SingularSystem { lambda: f64 },

    #[error("{algorithm}: {source}")]
    Algorithm {
        algorithm: AlgorithmId,
        #[source]
        source: Box<Error>,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{field} value {value:?} is not in the schema vocabulary")]
    OutOfVocabulary { field: &'static str, value: String },

    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model cache: {0}")]
    Cache(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery (divergence, singular
    /// solves) as opposed to bad input data or configuration.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::SingularSystem { .. } => true,
            Error::Algorithm { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    /// True for problems with the configuration rather than data or numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownAlgorithm(_)
                | Error::InvalidFractions(_)
                | Error::InvalidFoldCount { .. }
        )
    }
}
