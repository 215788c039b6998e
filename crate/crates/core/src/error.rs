use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} needs {requested}, which exceeds the cap of {cap}")]
    ResourceLimit { what: &'static str, requested: usize, cap: usize },

    #[error("dimension {0} is not supported (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("{0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no configuration satisfies the ensemble constraint")]
    EmptyEnsemble,

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
