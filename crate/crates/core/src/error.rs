use thiserror::Error;

/// Errors produced by the teleportation library.
#[derive(Debug, Error)]
pub enum QtpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("operator is not unitary (max |UU† - I| = {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The resource cannot support perfect teleportation. `defect` is
    /// `max_i |N·λ_i − 1|` over the Schmidt weights of the active block.
    #[error("resource admits no teleportation unitary: {reason} (defect {defect:.6})")]
    UnsolvableResource { reason: String, defect: f64 },

    /// The phase table does not yield a unitary sender transformation.
    #[error("phase table does not give a unitary sender transformation (defect {defect:.3e})")]
    InvalidPhaseTable { defect: f64 },

    #[error("input state has weight {leaked:.3e} outside the teleportable subspace")]
    SupportViolation { leaked: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = QtpError> = std::result::Result<T, E>;

pub(crate) fn dim_mismatch(msg: impl Into<String>) -> QtpError {
    QtpError::DimensionMismatch(msg.into())
}
