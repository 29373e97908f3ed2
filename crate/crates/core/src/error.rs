use thiserror::Error;

use crate::descriptor::ParseError;
use crate::scalar::ScalarError;
use crate::space::Space;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("non-finite value in output coordinate {coord}")]
    NonFinite { coord: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("space mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: Space, found: Space },
    #[error("fiber mismatch: {0}")]
    Fiber(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("diffeomorphism error: {0}")]
    Diffeomorphism(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("type error: {0}")]
    Type(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("simulation diverged at step {step}")]
    Divergence { step: usize },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn space_mismatch(expected: &Space, found: &Space) -> Self {
        Error::SpaceMismatch {
            expected: expected.clone(),
            found: found.clone(),
        }
    }
}
