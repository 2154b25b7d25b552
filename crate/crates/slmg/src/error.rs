//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by validation, I/O, and numeric preconditions.
///
/// [`Error::Internal`] is reserved for broken invariants that indicate a bug
/// rather than bad input; the CLI maps it to a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("probability entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, not 1 (tolerance 1e-9)")]
    NotNormalized { sum: f64 },

    #[error("distribution needs at least 2 classes, got {len}")]
    TooFewClasses { len: usize },

    #[error("KL divergence undefined: q[{index}] = 0 but p[{index}] > 0")]
    UnsupportedDivergence { index: usize },

    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },

    #[error("item {item_id:?} has no annotations")]
    EmptyItem { item_id: String },

    #[error("chance agreement is 1 with imperfect observed agreement")]
    DegenerateAgreement,

    #[error("no items with at least 2 ratings; cannot compute agreement")]
    NoRatableItems,

    #[error("no gold label for item {item_id:?}")]
    MissingGold { item_id: String },

    #[error("requested {requested} annotators but only {available} available")]
    InsufficientAnnotators { requested: usize, available: usize },

    #[error("soft example {index} has no annotation counts")]
    MissingCounts { index: usize },

    #[error("extra pool has {available} examples, {requested} requested")]
    PoolTooSmall { requested: usize, available: usize },

    #[error("split fractions must be positive and sum to 1, got sum {sum}")]
    BadFractions { sum: f64 },

    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty dataset")]
    EmptyData,

    #[error("parameter shapes do not match")]
    ShapeMismatch,

    #[error("unknown schedule {name:?} (expected B1, CLE, AOC, SLMG-S, or SLMG-I)")]
    UnknownSchedule { name: String },

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors that indicate a bug in this crate rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
