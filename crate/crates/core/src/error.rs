use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity error: size {size} exceeds supported maximum {max}")]
    Capacity { size: usize, max: usize },

    #[error("under-determined: {0}")]
    UnderDetermined(String),

    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    #[error("visibility undefined for output pair ({i}, {j}): zero plateau")]
    UndefinedVisibility { i: usize, j: usize },

    #[error("fit did not converge after {iterations} iterations: {reason}")]
    FitFailed { iterations: usize, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures that come from the numerics rather than from the
    /// caller's inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::FitFailed { .. } | Error::Numerical(_))
    }
}
