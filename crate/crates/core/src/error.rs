use thiserror::Error;

/// Errors raised by the sampling, discretization and estimation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid user-facing configuration. `key` names the offending setting.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An estimator was queried before it had enough data.
    #[error("insufficient state: {0}")]
    State(String),

    /// The time integrator produced a non-finite value.
    #[error("solver diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub fn state(message: impl Into<String>) -> Self {
        Error::State(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
