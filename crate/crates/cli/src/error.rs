use cps_core::Error;

/// Command failure, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::TruncationInsufficient { .. }
            | Error::QuadratureNotConverged(_)
            | Error::KernelDivergent { .. }
            | Error::SamplerNotConverged(_)
            | Error::DegenerateNormalization(_) => CliError::Numeric(msg),
            Error::Format(_) | Error::Io(_) => CliError::Io(msg),
            Error::EpsilonNonPositive(_)
            | Error::EmptyGrid
            | Error::InvalidGrid(_)
            | Error::SParameterPositive(_)
            | Error::EfficiencyTooLow { .. }
            | Error::IndexOutOfRange { .. }
            | Error::GridMismatch
            | Error::InvalidArgument(_) => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
