use thiserror::Error;

/// Errors surfaced by the solver toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("stream label must be nonempty")]
    InvalidLabel,
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample batch must contain at least one sample")]
    EmptyBatch,
    #[error("exact mean operator is not available for this problem")]
    MeanUnavailable,
    #[error("residual step size must be positive, got {0}")]
    InvalidStep(f64),
    #[error("line search exceeded {0} backtracks without satisfying the acceptance test")]
    LineSearchStalled(u32),
    #[error("mixing residuals are too close to compute a coefficient")]
    DegenerateMixing,
    #[error("problem dimension must be at least 1")]
    InvalidDimension,
    #[error("complementary enumeration supports at most {max} rows, got {got}")]
    TooLargeForEnumeration { max: usize, got: usize },
    #[error("data error: {0}")]
    DataError(String),
    #[error("covariance matrix is not symmetric (Frobenius asymmetry {0:.3e})")]
    InvalidCovariance(f64),
    #[error("window of {requested} rows overruns the in-sample half of {half} rows")]
    WindowOverrun { requested: usize, half: usize },
    #[error("portfolio variance is zero; Sharpe ratio is undefined")]
    DegenerateVariance,
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("io error on {path}: {source}")]
    IoError {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
