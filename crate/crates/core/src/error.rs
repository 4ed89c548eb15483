use thiserror::Error;

/// Errors raised by the sampling library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DrError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("target log-density is {value} at a state where a finite value or -inf is required")]
    NonFiniteTarget { value: f64 },

    #[error("current state has zero target density")]
    ZeroDensityStart,

    #[error("{what} diverges at the boundary ({detail})")]
    Divergent { what: &'static str, detail: String },

    #[error("operation not supported for this target: {0}")]
    Unsupported(String),

    #[error("row {row} is out of range (table has {rows} rows)")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("series too short: need more than {needed} samples, found {found}")]
    SeriesTooShort { needed: usize, found: usize },

    #[error("constant series: autocorrelation is undefined")]
    ConstantSeries,

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T, E = DrError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> DrError {
    DrError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(DrError::DimensionMismatch { expected, found })
    }
}
