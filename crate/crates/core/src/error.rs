use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The variants are grouped by how the command-line runner reports them:
/// configuration problems, runtime failures, and insufficient data (see
/// [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected: {} components {:?}", .components.len(), .components)]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("invalid graph structure: {0}")]
    Structure(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("graph has {n} nodes, exceeding the dense-matrix cap of {cap}")]
    TooLargeForDense { n: usize, cap: usize },

    #[error("mixing tolerance {tolerance} not reached within {max_t} steps")]
    MixingUnreached { tolerance: f64, max_t: usize },

    #[error("no Doeblin minorization found within {cap} steps")]
    MinorizationNotFound { cap: usize },

    #[error("return walk from node {node} exceeded the step cap of {cap}")]
    StepCapExceeded { node: usize, cap: u64 },

    #[error("age clock time regression: now={now}, requested={requested}")]
    TimeRegression { now: u64, requested: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("envelope fit failed at node {node}: {reason}")]
    Fit { node: usize, reason: String },

    #[error("infeasible input: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter { field: field.into(), reason: reason.into() }
    }

    /// Process exit code: 1 config error, 2 runtime error, 3 insufficient data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Disconnected { .. }
            | Error::Structure(_)
            | Error::InvalidWeights(_)
            | Error::Parameter { .. }
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::Json(_) => 1,
            Error::InsufficientData(_) => 3,
            _ => 2,
        }
    }
}
