use thiserror::Error;

/// Errors raised by estimators, oracles and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integrand has no analytic ANOVA data")]
    UnsupportedIntegrand,

    #[error("integrand has zero estimated variance")]
    DegenerateIntegrand,

    #[error("unsupported dimension d={0}: the truncation schedule needs d >= 2")]
    UnsupportedDimension(usize),

    #[error("gamma must be < -1, got {0}")]
    InvalidGamma(f64),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("numerical failure in {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
