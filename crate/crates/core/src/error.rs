use thiserror::Error;

/// Errors surfaced by the allocation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (bad probability, duplicate
    /// id, index out of range, non-uniform utilities, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// The instance is too large for an exhaustive code path.
    #[error("capacity exceeded for {what}: required {required}, limit {limit}")]
    Capacity {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    /// A non-overlapping evaluator was handed an overlapping regime.
    #[error("regime has overlapping tests; use the exact evaluator instead")]
    OverlappingRegime,

    /// Malformed population CSV row.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// No test with positive welfare exists (every individual has q = 0).
    #[error("no viable test: every individual is certainly infected")]
    NoViableTest,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("regime JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
