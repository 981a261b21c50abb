use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("matrix has no feature columns")]
    NoFeatures,

    #[error("single class: every label is {0}")]
    SingleClass(u8),

    #[error("label at row {row} is {value}, expected 0 or 1")]
    InvalidLabel { row: usize, value: u8 },

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("zero variance column {0}")]
    ZeroVariance(usize),

    #[error("degenerate data matrix: pooled within-feature variance is zero")]
    DegenerateMatrix,

    #[error("non-finite objective while fitting feature {0}")]
    NonFiniteObjective(usize),

    #[error("AUC undefined: {signals} signal features out of {total}")]
    AucUndefined { signals: usize, total: usize },

    #[error("leading score is zero; profile ratio undefined")]
    ZeroLeadingScore,

    #[error("empty feature selection")]
    EmptySelection,

    #[error("duplicate index {0} in selection")]
    DuplicateIndex(usize),

    #[error("feature index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("class {class} has {size} members, fewer than {folds} folds")]
    ClassTooSmall { class: u8, size: usize, folds: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
