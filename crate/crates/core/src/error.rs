use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps these onto exit codes: parse failures exit with 2, invalid
/// configuration with 3, numeric failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error in {source_name} at line {line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("fixed-point condition unmet at r_max = {r_max}: {reason}")]
    FixedPointUnmet { r_max: f64, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
