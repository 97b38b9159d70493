//! Error type shared by all probe modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GcError {
    /// Malformed or inconsistent input (bad counts, bad flags, empty families).
    #[error("input error: {0}")]
    Input(String),

    /// Operands live in incompatible spaces.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A matrix or evaluator produced NaN/Inf.
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    /// The data does not define a valid generalized complex structure.
    #[error("invalid structure: {context} (residual {residual:.3e})")]
    InvalidStructure { context: String, residual: f64 },

    /// A finite-difference stencil would leave the sample box.
    #[error("sample point violates the finite-difference margin {margin:.3e} on axis {axis}")]
    BoundaryMargin { axis: usize, margin: f64 },
}

pub type Result<T> = std::result::Result<T, GcError>;
