use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied parameters or shapes the operation cannot accept.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("operator is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("vector is not normalized (norm deviation {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),

    #[error("symmetry {which} has no representation on {basis}")]
    UnsupportedSymmetry { which: String, basis: String },

    #[error("Laurent coefficients not converged (trailing magnitude {trailing:.3e})")]
    Truncation { trailing: f64 },

    #[error("half-integer invariant from {0} representation")]
    HalfInteger(String),

    #[error("decay factor is infinite ({0})")]
    TanPole(String),

    #[error("numeric subspace has dimension {found}, need at least {needed}")]
    SubspaceTooSmall { found: usize, needed: usize },

    /// Two independent computations of the same quantity disagree.
    #[error("internal consistency failure: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::UnsupportedSymmetry { .. } | Error::TanPole(_)
        )
    }
}
