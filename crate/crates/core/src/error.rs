use thiserror::Error;

/// Errors from reading or writing a JSON document, before any semantic
/// checks run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("cannot encode document: {0}")]
    Encode(String),
}
