use thiserror::Error;

/// Errors produced by the core grid, regression and bootstrap operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("design error: {0}")]
    Design(String),

    #[error("layer count mismatch: stack has {stack} layers, design expects {design}")]
    LayerMismatch { stack: usize, design: usize },

    #[error("zero residual variance at {count} cell(s) with strict floor policy")]
    ZeroVariance { count: usize },

    #[error("multiplier vector has length {got}, residual stack has {expected} layers")]
    MultiplierLength { got: usize, expected: usize },

    #[error("cell {0} is masked out")]
    MaskedCell(usize),

    #[error("empty boundary region and whole-domain fallback is disabled")]
    EmptyBoundary,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
