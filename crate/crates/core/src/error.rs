use thiserror::Error;

use crate::amp::AmpTrace;
use crate::se::SePoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The single-crossing property fails, so the capacity formulas do not apply.
    #[error("single-crossing property violated: {} crossing(s) at rho = {crossings:?}", crossings.len())]
    SingleCrossing { crossings: Vec<f64> },

    #[error("state evolution did not converge within {limit} iterations")]
    IterationLimit { limit: usize, trace: Vec<SePoint> },

    #[error("numeric blowup at iteration {iteration}: {reason}")]
    NumericBlowup {
        iteration: usize,
        reason: String,
        trace: Box<AmpTrace>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid {field}: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
