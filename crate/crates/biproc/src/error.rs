use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested quantity.
    #[error("domain error: {0}")]
    Domain(String),

    /// A simulation was refused because its expected event count exceeds
    /// the configured budget. Population size grows exponentially in the
    /// horizon, so this guard fires long before memory does.
    #[error(
        "expected event count {expected:.3e} exceeds the budget {budget:.3e}; \
         shorten the horizon or raise the event budget"
    )]
    EventBudget { expected: f64, budget: f64 },

    /// A rejection sampler was aborted because its estimated acceptance
    /// rate fell below the floor.
    #[error(
        "estimated acceptance rate {rate:.2e} after {attempts} attempts is \
         below the floor {floor:.1e}; the conditioning event is too rare"
    )]
    AcceptanceFloor { rate: f64, attempts: u64, floor: f64 },

    /// An experiment configuration could not be interpreted.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
