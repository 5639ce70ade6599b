use serde::Serialize;
use thiserror::Error;

/// One problem found while validating a DTD, a document or a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// What the message is about: a document name, "dtd" or "query".
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown {kind} {id:?}")]
    NotFound { kind: &'static str, id: String },
    #[error("validation failed")]
    Validation(Vec<Diagnostic>),
    #[error("catalog {0:?} already exists")]
    Duplicate(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("store I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn validation(subject: &str, message: impl Into<String>) -> Self {
        ServiceError::Validation(vec![Diagnostic::new(subject, message)])
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            ServiceError::Validation(ds) => ds.clone(),
            other => vec![Diagnostic::new("request", other.to_string())],
        }
    }

    /// Process exit status for the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Validation(_) | ServiceError::Duplicate(_) => 1,
            ServiceError::NotFound { .. } | ServiceError::BadRequest(_) => 2,
            ServiceError::Io(_) | ServiceError::Internal(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ServiceError>;
