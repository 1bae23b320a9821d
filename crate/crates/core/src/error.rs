use thiserror::Error;

/// Errors raised by the selection, optimization and inference layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("the query selected no variables")]
    EmptySelection,

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("KKT reconstruction residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    Inconsistent { residual: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no selected draws after {attempts} attempts")]
    DegenerateSelection { attempts: u64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("query {index} failed: {source}")]
    Query {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
