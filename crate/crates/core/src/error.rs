use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, IrlError>;

#[derive(Debug, Error)]
pub enum IrlError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    #[error("unknown environment `{0}`")]
    NotFound(String),

    #[error("zero likelihood for demonstrated pair (state {state}, action {action})")]
    ZeroLikelihood { state: usize, action: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<IrlError>,
    },
}

impl IrlError {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        IrlError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IrlError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        IrlError::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Strips `AtIteration` wrappers.
    pub fn root(&self) -> &IrlError {
        match self {
            IrlError::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }
}
