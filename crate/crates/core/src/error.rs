use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("past vectors have different truncation depths ({left} vs {right})")]
    DepthMismatch { left: usize, right: usize },

    #[error("a past vector needs at least one coordinate")]
    EmptyPast,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transition matrix is reducible: {0}")]
    Reducible(String),

    #[error("stationary distribution did not converge (residual {residual:e})")]
    NotConverged { residual: f64 },

    #[error("no conditional-mean oracle: {0}")]
    NoOracle(String),

    #[error("estimator has not completed any level yet")]
    NoCompletion,

    #[error("snapshot depth {depth} exceeds the stopping time {lambda}")]
    SnapshotTooDeep { depth: usize, lambda: u64 },

    #[error("no recurrence of the level-{level} prefix within the history")]
    NoRecurrence { level: u64 },

    #[error("only {completed} of {replicates} replicates completed level {level}")]
    InsufficientCompletions {
        level: u64,
        completed: usize,
        replicates: usize,
    },

    #[error("malformed configuration: {0}")]
    Config(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("budget of {budget} samples exhausted at level {reached} (seed {seed}), minimum level {required}")]
    BudgetExhausted {
        seed: u64,
        budget: u64,
        reached: u64,
        required: u64,
    },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BudgetExhausted { .. } => 2,
            Error::InvariantViolation(_) => 3,
            _ => 1,
        }
    }
}
