use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants split into two families: validation failures (bad input files,
/// bad shapes, bad configuration) and numerical failures (non-convergence,
/// degenerate data). The CLI maps them to exit codes 2 and 3 respectively.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("duplicate id {id:?} at row {row}")]
    DuplicateId { id: String, row: usize },

    #[error("invalid anchors: {0}")]
    InvalidAnchors(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("bundle version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("checksum mismatch for {file}")]
    ChecksumMismatch { file: String },

    #[error("bundle error: {0}")]
    Bundle(String),

    #[error("graph has an isolated node {0}")]
    IsolatedNode(usize),

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solver did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    SolverNoConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),
}

impl Error {
    /// True for failures of the numerical pipeline rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::SolverNoConvergence { .. }
                | Error::Degenerate(_)
                | Error::IsolatedNode(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
