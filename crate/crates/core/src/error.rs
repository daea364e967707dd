use thiserror::Error;

use crate::domain::Field;

/// Worst offending node found while searching for a feasible multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDiagnostic {
    /// Largest multiplier that was tried.
    pub c_tried: f64,
    pub node: usize,
    pub inequality: String,
    /// Amount by which the inequality failed (positive).
    pub margin: f64,
    pub violations: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("weight exponent {mu} is not integrable (need mu > -1)")]
    NonIntegrableWeight { mu: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Box<Field>,
    },

    #[error("nonlinearity evaluated outside the positive cone: s = {value} with exponent {exponent}")]
    Singularity { value: f64, exponent: f64 },

    #[error("barrier degenerates at node {node}: value {value}")]
    BarrierDegeneracy { node: usize, value: f64 },

    #[error(
        "no multiplier C <= {c_max} satisfies the comparison inequalities \
         (worst: {} at node {} by {:.3e})",
        .diagnostic.inequality, .diagnostic.node, .diagnostic.margin
    )]
    CalibrationFailure {
        c_max: f64,
        diagnostic: CalibrationDiagnostic,
    },

    #[error("truncation rectangle is empty at node {node}: lower {lower} > upper {upper}")]
    RectangleViolation { node: usize, lower: f64, upper: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
