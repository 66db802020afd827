use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The interface left the admissible set `max|f| < 0.99`.
    #[error("interface not admissible: max|f| = {max_abs:.6} (limit {limit})")]
    Inadmissible { max_abs: f64, limit: f64 },

    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("threshold undefined: equal viscosities")]
    ThresholdUndefined,

    #[error("singular discrete system ({context}); estimated condition number {condition:.3e}")]
    Singular { context: String, condition: f64 },

    #[error("{context}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        context: String,
        iterations: usize,
        residual: f64,
    },

    #[error("problem is ill-posed for these parameters (set allow_illposed to integrate anyway)")]
    IllPosed,

    #[error("fit rejected: {0}")]
    FitRejected(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
