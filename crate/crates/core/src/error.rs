use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("degenerate input: row {row} has zero norm")]
    DegenerateInput { row: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("perpendicular recursion is singular at step {step} (1 + z = {value:e})")]
    Singular { step: usize, value: f64 },

    #[error("moment table is missing {0}")]
    IncompleteTable(String),

    #[error("moment table violates the sphere identities (max residual {residual:e})")]
    InconsistentTable { residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{flagged} of {reps} replications failed numerically (budget {budget})")]
    FlagBudget {
        flagged: usize,
        reps: usize,
        budget: usize,
    },

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
