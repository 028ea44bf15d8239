use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Floating-point breakdown (singular matrix, underflow of every
    /// component at a data point, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A component emptied out or a covariance stayed singular after the
    /// one-shot jitter; the fit is unusable and is reported as failed.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("every model in the sweep failed to fit")]
    AllModelsFailed,

    #[error("csv error at row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end:
    /// 2 for unusable input, 3 for a computation that failed on valid input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch(_)
            | Error::InvalidParameter(_)
            | Error::InvalidInput(_)
            | Error::Csv { .. }
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Numeric(_) | Error::DegenerateFit(_) | Error::Init(_) | Error::AllModelsFailed => 3,
        }
    }
}
