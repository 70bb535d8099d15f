use thiserror::Error;

pub type Result<T, E = QdotError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QdotError {
    #[error("flexp is undefined for {0}")]
    Domain(f64),
    #[error("non-finite input at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("length mismatch: x has {x} components, y has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot round to the perforate format")]
    PerforateFormat,
    #[error("bin product overflowed in {0:?}")]
    BinOverflow(crate::Precision),
    #[error("dot product overflowed the input precision")]
    Overflow,
    #[error("solver breakdown at iteration {iter}: {reason}")]
    Breakdown { iter: usize, reason: String },
}
