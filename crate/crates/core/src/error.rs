use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlexError {
    /// A configuration value violates its documented invariant.
    #[error("configuration error: {0}")]
    Config(String),
    /// A sampler parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// A vector or matrix does not have the expected shape.
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    /// Frames were pushed out of order into a context window.
    #[error("sequencing error: expected global index {expected}, got {got}")]
    Sequencing { expected: usize, got: usize },
    /// An operation was called with inputs it cannot work with (empty, too few samples, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// A closed form was evaluated at a singular point.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, FlexError>;

pub(crate) fn shape_err(expected: impl ToString, got: impl ToString) -> FlexError {
    FlexError::Shape {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
