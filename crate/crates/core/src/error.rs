use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported self-convolution order {0} (expected 2 or 4)")]
    UnsupportedOrder(u32),

    #[error("insufficient local data at {point:?}: local linear system is singular; enlarge the bandwidth or shrink the weight support")]
    InsufficientLocalData { point: Vec<f64> },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("variogram fit failed: {0}")]
    VariogramFitFailed(String),

    #[error("no location pairs fall within the lag range")]
    NoPairsInRange,

    #[error("asymptotic variance must be positive, got {0}")]
    NonpositiveVariance(f64),

    #[error("bootstrap distribution is degenerate: all {0} replicates are identical")]
    BootstrapDegenerate(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Pipeline stage this error belongs to, used in CLI diagnostics.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "cholesky",
            Error::InsufficientLocalData { .. } => "quadrature",
            Error::DegenerateDesign(_)
            | Error::VariogramFitFailed(_)
            | Error::NoPairsInRange
            | Error::BootstrapDegenerate(_) => "fit",
            Error::Parse { .. } | Error::Io(_) => "parse",
            Error::DimensionMismatch { .. }
            | Error::UnsupportedOrder(_)
            | Error::NonpositiveVariance(_)
            | Error::InvalidInput(_) => "input",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
