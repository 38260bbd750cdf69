use std::io;

use thiserror::Error;

/// Errors raised across the streaming pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("snapshot norm {norm:e} is too small to initialize the factorization")]
    ZeroSnapshot { norm: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("snapshot index {index} out of range for {len} columns")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("snapshot index {0} was already streamed into the sketch")]
    DuplicateIndex(usize),

    #[error("sketch has numerical rank {rank}, below the requested rank {requested}")]
    RankDeficientSketch { rank: usize, requested: usize },

    #[error("regularization weights must be positive, got {0:e}")]
    NonpositiveGamma(f64),

    #[error("recursive update produced a non-finite or singular conversion factor at row {row}")]
    NonfiniteUpdate { row: usize },

    #[error("least-squares matrix has numerical rank {rank} < {cols}")]
    RankDeficient { rank: usize, cols: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("projection paradigms need time-derivative snapshots")]
    MissingDerivatives,

    #[error("every regularization candidate produced a non-finite trajectory")]
    AllUnstable,

    #[error("query parameter {query} lies outside the training range [{lo}, {hi}]")]
    Extrapolation { query: f64, lo: f64, hi: f64 },

    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),

    #[error("state became non-finite at step {step}")]
    NonfiniteState { step: usize },

    #[error(
        "Kaplan-Yorke dimension undefined: every partial sum of the exponents is non-negative"
    )]
    UndefinedDimension,

    #[error("basis is not orthonormal (defect {defect:e})")]
    NotOrthonormal { defect: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed snapshot file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
