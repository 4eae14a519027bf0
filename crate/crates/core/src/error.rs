use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown group {0}")]
    UnknownGroup(usize),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid group structure: {0}")]
    InvalidGroups(String),

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("safe radius must be nonnegative, got {0}")]
    NegativeRadius(f64),

    /// Weak duality failed by more than rounding can explain.
    #[error("duality gap {gap:e} is below the rounding tolerance -{tolerance:e}")]
    NegativeGap { gap: f64, tolerance: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("internal error: {0}")]
    Internal(String),
}
