use thiserror::Error;

/// Errors raised by state construction, kernels, simulation and estimation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncation insufficient: {what} (tail/requirement {required}, available {available})")]
    TruncationInsufficient {
        what: &'static str,
        required: f64,
        available: f64,
    },
    #[error("smoothing parameter must be positive, got {0}")]
    EpsilonNonPositive(f64),
    #[error("phase grid is empty")]
    EmptyGrid,
    #[error("invalid phase grid: {0}")]
    InvalidGrid(String),
    #[error("s parameter must be <= 0, got {0}")]
    SParameterPositive(f64),
    #[error("detection efficiency {eta} is not in (1/2, 1]")]
    EfficiencyTooLow { eta: f64 },
    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),
    #[error("kernel series diverges: eps = {epsilon} does not exceed the pattern-function growth rate {growth}")]
    KernelDivergent { epsilon: f64, growth: f64 },
    #[error("inverse-CDF sampler failed: {0}")]
    SamplerNotConverged(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("degenerate normalization: integral of raw estimate is {0}")]
    DegenerateNormalization(f64),
    #[error("phase grids do not match")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
