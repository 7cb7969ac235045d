use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("model {model:?} has no prediction for test sample {sample_id:?}")]
    MissingPrediction { model: String, sample_id: String },
    #[error("{reference:?} does not resolve to a test sample")]
    DanglingReference { reference: String },
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{what} = {value} is outside [0, 1]")]
    RangeError { what: String, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("training labels contain fewer than two classes")]
    DegenerateLabels,
    #[error("input contains NaN or infinite values")]
    NonFiniteInput,
    #[error("no embedding for sample {0:?}")]
    MissingEmbedding(String),
    #[error("duplicate model id {0:?}")]
    DuplicateModel(String),
    #[error("rankings cover different model sets")]
    SetMismatch,
    #[error("provenance mismatch: {0}")]
    ProvenanceError(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Machine-readable error name, used in API bodies and CLI messages.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownLabel(_) => "UnknownLabel",
            Error::MissingPrediction { .. } => "MissingPrediction",
            Error::DanglingReference { .. } => "DanglingReference",
            Error::ParseError { .. } => "ParseError",
            Error::DuplicateId(_) => "DuplicateId",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::RangeError { .. } => "RangeError",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::ConfigError(_) => "ConfigError",
            Error::DegenerateLabels => "DegenerateLabels",
            Error::NonFiniteInput => "NonFiniteInput",
            Error::MissingEmbedding(_) => "MissingEmbedding",
            Error::DuplicateModel(_) => "DuplicateModel",
            Error::SetMismatch => "SetMismatch",
            Error::ProvenanceError(_) => "ProvenanceError",
            // An unreadable input path surfaces to users as a parse failure.
            Error::Io { .. } => "ParseError",
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::ConfigError(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
