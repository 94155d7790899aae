use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the grid, solvers and monitors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("grid mismatch: expected {expected:?}, found {found:?}")]
    GridMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("size guard exceeded: {cells} cells > {limit} allowed for O(N^2) {what}")]
    SizeGuard {
        what: &'static str,
        cells: usize,
        limit: usize,
    },

    #[error("point outside domain: {0}")]
    OutsideDomain(String),

    #[error("singular kernel evaluation: x coincides with y")]
    Coincident,

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("time step {dt:e} exceeds CFL limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("negative density {value:e} at cell {index} after transport")]
    NegativeDensity { index: usize, value: f64 },

    #[error("infeasible initial data: {0}")]
    Infeasible(String),

    #[error("{0}")]
    Zlotnik(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
