use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular matrix (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("newton iteration did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("undefined transmissibility: sensor {sensor} has a vanishing order-{order} response")]
    UndefinedTransmissibility { sensor: usize, order: usize },

    #[error("time integration failed: {0}")]
    Integration(String),

    #[error("at {freq_hz:.4} Hz: {source}")]
    AtFrequency {
        freq_hz: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn at_frequency(self, omega: f64) -> Self {
        Error::AtFrequency {
            freq_hz: omega / (2.0 * std::f64::consts::PI),
            source: Box::new(self),
        }
    }

    /// True for errors caused by the caller (bad input/config) rather than by
    /// a numerical failure.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Config { .. } | Error::Json(_) => true,
            Error::AtFrequency { source, .. } => source.is_user_error(),
            _ => false,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Singular { .. } => "singular",
            Error::NotConverged { .. } => "not_converged",
            Error::UndefinedTransmissibility { .. } => "undefined_transmissibility",
            Error::Integration(_) => "integration",
            Error::AtFrequency { source, .. } => source.kind(),
            Error::Config { .. } => "config",
            Error::Cache(_) => "cache",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
