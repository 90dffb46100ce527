use thiserror::Error;

/// Failures raised while evaluating paths and guidance fields.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidanceError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// `J_phi` lost rank; the projection `(J J^T)^-1` does not exist here.
    #[error("level-set Jacobian is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("tangent direction undefined: Jacobian is rank deficient (smallest singular value {sigma_min:e})")]
    TangentUndefined { sigma_min: f64 },

    #[error("behavior signal has {got} components, path needs {expected}")]
    BehaviorDimension { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, GuidanceError>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GuidanceError::InvalidParameter { name, reason: format!("must be a finite positive number, got {value}") })
    }
}
