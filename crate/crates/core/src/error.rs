use std::io;

use thiserror::Error;

use crate::model::Dimension;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("parse error at record {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown {dimension} symbol {symbol:?} at record {line}")]
    UnknownSymbol {
        dimension: Dimension,
        symbol: String,
        line: usize,
    },

    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("run of {run} steps exceeds maximum duration {d_max}")]
    DurationOverflow { run: usize, d_max: usize },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("fold {fold} ({procedure}): {source}")]
    Fold {
        fold: usize,
        procedure: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
