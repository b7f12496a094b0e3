use thiserror::Error;

use crate::qp::QpStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{module}: dimension mismatch: {detail}")]
    Dimension { module: &'static str, detail: String },

    #[error("{module}: invalid input: {detail}")]
    InvalidInput { module: &'static str, detail: String },

    #[error("qp: solve ended with status {status:?}")]
    Solve { status: QpStatus },

    #[error("learner: iteration {iteration}, step {step}: {source}")]
    Learning {
        iteration: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(module: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidInput {
            module,
            detail: detail.into(),
        }
    }

    /// Name of the module that raised the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Dimension { module, .. } | Error::InvalidInput { module, .. } => module,
            Error::Solve { .. } => "qp",
            Error::Learning { .. } => "learner",
        }
    }
}
