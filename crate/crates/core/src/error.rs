use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no feasible allocation: every tone is unusable for this user")]
    NoFeasibleAllocation,

    /// A rate target cannot be met; `max_rate` is the best achievable rate.
    #[error("target rate {target} is infeasible (maximum achievable {max_rate})")]
    Infeasible { target: f64, max_rate: f64 },

    #[error("search space of {size} joint allocations exceeds the cap of {cap}; use fewer tones or levels")]
    SearchSpaceTooLarge { size: u128, cap: u128 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
