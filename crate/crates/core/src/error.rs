use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A degree distribution or ensemble failed validation.
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    /// Malformed ensemble file, channel spec or other textual input.
    #[error("parse error: {0}")]
    Parse(String),

    /// Two densities were built on different quantization grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The quantization range cannot hold the density without losing mass.
    #[error("quantization range too small: truncated mass {truncated:e} exceeds {limit:e}")]
    RangeTooSmall { truncated: f64, limit: f64 },

    /// An exhaustive computation would exceed its feasibility guard.
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    /// Finite-length graph construction could not remove all duplicate edges.
    #[error("graph repair failed after {attempts} attempts ({remaining} duplicate edges left)")]
    RepairFailed { attempts: usize, remaining: usize },

    /// An operation precondition does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    /// True for errors caused by bad user input (as opposed to numerical failures).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::InvalidDistribution(_)
                | Error::Parse(_)
                | Error::Precondition(_)
                | Error::SizeGuard(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
