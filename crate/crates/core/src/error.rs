use thiserror::Error;

/// Errors shared across the crate.
///
/// Variants map onto the CLI exit contract: configuration and validation
/// problems (`InvalidParameter`, `InvalidSystem`, `InsufficientData`,
/// `InsufficientDepth`, `Unsupported`) exit with status 2, solver
/// non-convergence (`NumericFailure`) with status 3 and `ResourceLimit`
/// with status 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient depth: needed {needed}, available {available}")]
    InsufficientDepth { needed: usize, available: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numeric failure in {op}: residual {residual:e} after {iterations} iterations")]
    NumericFailure {
        op: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Exit status of the CLI contract for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericFailure { .. } => 3,
            Error::ResourceLimit(_) => 4,
            _ => 2,
        }
    }
}
