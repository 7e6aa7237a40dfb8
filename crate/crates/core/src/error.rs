use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("identically-zero polynomial")]
    ZeroPolynomial,

    #[error("not a trajectory of the system (relative residual {residual:.3e})")]
    NotATrajectory { residual: f64 },

    #[error("input is persistently exciting of order {order}")]
    PersistentlyExciting { order: usize },

    #[error("eigenvalue conflict: the spectrum of A meets the root set at distance {distance:.3e}")]
    EigenvalueConflict { distance: f64 },

    #[error("near-singular matrix polynomial (condition number {condition:.3e})")]
    NearSingular { condition: f64 },

    #[error("numerical construction failed: {0}")]
    ConstructionFailed(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// True for errors caused by the caller's data rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::ZeroPolynomial)
    }
}
