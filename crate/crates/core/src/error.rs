use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The data make a shrinkage factor undefined (zero spread).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A quantity that must be positive by construction was not.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (value {value:e}, error estimate {err_estimate:e})"
    )]
    ConvergenceFailure {
        value: f64,
        err_estimate: f64,
        subdivisions: usize,
    },

    /// A computed constant violates a property the theory guarantees.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("bracket failure on [{lo}, {hi}]: H(lo) = {h_lo:e}, H(hi) = {h_hi:e}")]
    BracketFailure {
        lo: f64,
        hi: f64,
        h_lo: f64,
        h_hi: f64,
    },

    #[error("eigenvector matrix is not orthonormal: {0}")]
    Orthonormality(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
