use thiserror::Error;

/// Errors produced by samplers, estimators and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// The corrected-noise matrix `tau*eta*I - 0.5*eta^2*s*s^T` has a negative
    /// eigenvalue: the step size is too large for the estimated gradient noise.
    /// `max_eta` is the largest admissible step size, `2*tau / lambda_max(s s^T)`.
    #[error("step size {eta} too large for the estimated gradient noise (max admissible eta = {max_eta})")]
    StepTooLarge { eta: f64, max_eta: f64 },

    /// A gradient evaluation returned NaN or infinity. Carries a dump of the
    /// offending chain state for diagnosis.
    #[error("non-finite gradient at iteration {iteration}, temperature {temperature}: position {position:?}")]
    NonFiniteGradient {
        iteration: u64,
        temperature: f64,
        position: Vec<f64>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration schema violation; the message names the offending field.
    #[error("config error: {0}")]
    Config(String),

    #[error("quantile inversion failed to bracket level {level}")]
    QuantileBracket { level: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
