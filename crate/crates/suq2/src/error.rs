use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("window mismatch: operator on {op:?}, vector on {vec:?}")]
    WindowMismatch { op: String, vec: String },

    #[error("{what} budget exceeded: needed {needed}, budget {budget}")]
    BudgetExceeded { what: &'static str, needed: usize, budget: usize },

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("extraction failed: {0}")]
    ExtractionFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
