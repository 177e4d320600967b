use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("unsupported distribution: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The generation total does not fit in `u128`; carries `ln` of the
    /// projected total so callers can continue in log space.
    #[error("population overflow (log-scale estimate {log_estimate:.3})")]
    Overflow { log_estimate: f64 },
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
