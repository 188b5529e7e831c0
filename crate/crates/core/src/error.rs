use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("time {t} outside the domain [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("interval mismatch: [{a0}, {b0}] vs [{a1}, {b1}]")]
    IntervalMismatch { a0: f64, b0: f64, a1: f64, b1: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incompatible field grids")]
    GridMismatch,
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("contraction precondition violated: bound {bound} is not below {limit}")]
    NotContractive { bound: f64, limit: f64 },
    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("displacement leaves the chart: alpha {alpha}, min det {min_det}")]
    OutsideChart { alpha: f64, min_det: f64 },
    #[error("path leaves the local-addition domain at t = {t}")]
    OutsideDomain { t: f64 },
    #[error("knot compatibility violated at t = {t} (defect {defect:e})")]
    Incompatible { t: f64, defect: f64 },
    #[error("subdivision limit {0} reached without meeting the contraction budget")]
    SubdivisionLimit(usize),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
