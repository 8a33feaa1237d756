use std::path::PathBuf;

use crate::robin::LinearSolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("counts too small: every axis needs at least 3 nodes, got {0:?}")]
    CountsTooSmall(Vec<usize>),

    #[error("unknown selector `{0}`")]
    UnknownSelector(String),

    #[error("empty selection `{0}`")]
    EmptySelection(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient violates its bounds: {0}")]
    Coefficient(String),

    #[error("parameter `{name}` = {value} is out of range: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("linear solve failed: {message} ({report:?})")]
    Solver {
        message: String,
        report: LinearSolveReport,
    },

    #[error("source {index}: {source}")]
    SourceSolve {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn field(msg: impl Into<String>) -> Self {
        Error::InvalidField(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True when the failure originates in a linear solve (possibly wrapped
    /// with a source index).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Solver { .. } => true,
            Error::SourceSolve { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
