use thiserror::Error;

use crate::lattice::IntMat2;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix {matrix} cannot be reduced to a canonical form: {reason}")]
    NotReducible { matrix: IntMat2, reason: String },

    #[error("Lawton system did not converge (best max residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },

    #[error("filter fails the Lawton system: max residual {max_abs:e} exceeds {tol:e}")]
    FilterRejected { max_abs: f64, tol: f64 },

    #[error("support half-width N0 must be at least 1, got {0}")]
    InvalidN0(i64),

    #[error("spatial step {step} exceeds the allowed maximum {max_step}")]
    GridTooCoarse { step: f64, max_step: f64 },

    #[error("filter does not match the scaling field: {0}")]
    MismatchedFilter(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
