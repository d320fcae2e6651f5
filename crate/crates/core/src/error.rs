use thiserror::Error;

/// Errors produced by the fitting, bootstrap, tuning and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quantile level must lie in (0, 1), got {0}")]
    InvalidQuantile(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge after {iterations} iterations (duality gap {gap:.3e}, kkt residual {kkt:.3e})")]
    NotConverged { iterations: usize, gap: f64, kkt: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("{failed} of {total} bootstrap replicates failed (ceiling 1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("grid has {cells} cells, above the cap of {cap}")]
    GridTooLarge { cells: u128, cap: u128 },

    #[error("{0}")]
    Aborted(String),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::Singular(_)
                | Error::TooManyFailures { .. }
                | Error::Aborted(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
