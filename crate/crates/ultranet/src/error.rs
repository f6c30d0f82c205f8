use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("derivative order {order} exceeds alpha_max = {max}")]
    UnsupportedOrder { order: usize, max: usize },
    #[error("invalid net: {0}")]
    InvalidNet(String),
    #[error("incompatible nets: {0}")]
    Incompatible(String),
    #[error("aliasing: {0}")]
    Aliasing(String),
    #[error("mollifier construction failed at moment order {alpha}: residual {residual:e} exceeds {tolerance:e}")]
    ConstructionFailed { alpha: usize, residual: f64, tolerance: f64 },
    #[error("underdetermined fit: {samples} samples above the noise floor, need {required}")]
    Underdetermined { samples: usize, required: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("wraparound: {0}")]
    Wraparound(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("cone separation failed: bin {bin} lies outside the target cone")]
    SeparationFailed { bin: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}
