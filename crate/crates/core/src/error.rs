//! Error type shared by all modules.

use thiserror::Error;

/// Unified error type for model construction, numerics, and I/O.
///
/// The CLI maps [`Error::is_numerical`] failures to exit code 2 and
/// everything else (usage, schema, I/O) to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid construction produced no nodes (zero/negative extent or pitch).
    #[error("grid has no nodes: {0}")]
    EmptyGrid(String),

    /// Connectivity produced no candidate elements.
    #[error("connectivity radius {radius} produces no elements on a {nx}x{ny} grid")]
    NoElements { radius: usize, nx: usize, ny: usize },

    /// An element would connect a node to itself or two coincident nodes.
    #[error("zero-length element between nodes {0} and {1}")]
    ZeroLengthElement(usize, usize),

    /// Non-positive section or material constant.
    #[error("section property must be positive: {0}")]
    InvalidSection(String),

    /// A vector or matrix dimension does not match the model.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// A DoF index is outside the model or listed twice.
    #[error("invalid DoF selection: {0}")]
    InvalidDofSelection(String),

    /// A matrix expected to be symmetric positive definite was not.
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    /// A matrix expected to be symmetric was not.
    #[error("matrix is not symmetric (max asymmetry {max_asym:.3e} exceeds tolerance)")]
    NotSymmetric { max_asym: f64 },

    /// A constraint matrix lost rank (desired modes collinear under K).
    #[error("constraint matrix is rank deficient: {0}")]
    RankDeficient(String),

    /// Vectors supplied to an operation requiring an orthonormal set were not.
    #[error("input columns are not orthonormal (max deviation {max_dev:.3e})")]
    NotOrthonormal { max_dev: f64 },

    /// The linear program could not be solved to optimality or feasibility.
    #[error("linear program failed: {0}")]
    LpFailure(String),

    /// Generic numerical breakdown (iteration limits, NaN, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Configuration value out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Problem/bundle file violates the schema.
    #[error("schema error in {file}: {message}")]
    Schema { file: String, message: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical pipeline (exit code 2 in the CLI),
    /// false for usage/schema/I/O problems (exit code 1).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::NotSymmetric { .. }
                | Error::RankDeficient(_)
                | Error::NotOrthonormal { .. }
                | Error::LpFailure(_)
                | Error::Numerical(_)
        )
    }
}
