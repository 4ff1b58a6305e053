use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A circulant embedding produced a materially negative eigenvalue.
    #[error("circulant embedding has negative eigenvalue {value:e} at index {index}")]
    NegativeEigenvalue { index: usize, value: f64 },

    /// Levinson recursion denominator collapsed.
    #[error("Toeplitz recursion breakdown at order {order}: denominator {denominator:e}")]
    Breakdown { order: usize, denominator: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Domain(_) | Error::LengthMismatch { .. })
    }
}
