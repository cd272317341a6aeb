use thiserror::Error;

use crate::frontend::ast::Span;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error("{span}: SyntaxError: {message}")]
    Syntax { span: Span, message: String },
    #[error("{span}: UnsupportedConstruct: {construct}")]
    Unsupported { span: Span, construct: String },
    #[error("{span}: ConflictingAnnotations on `{function}`: {decorators}")]
    ConflictingAnnotations { span: Span, function: String, decorators: String },
}

impl FrontendError {
    pub fn span(&self) -> Span {
        match self {
            FrontendError::Syntax { span, .. }
            | FrontendError::Unsupported { span, .. }
            | FrontendError::ConflictingAnnotations { span, .. } => *span,
        }
    }

    pub(crate) fn syntax(span: Span, message: impl Into<String>) -> Self {
        FrontendError::Syntax { span, message: message.into() }
    }

    pub(crate) fn unsupported(span: Span, construct: impl Into<String>) -> Self {
        FrontendError::Unsupported { span, construct: construct.into() }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CompileError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("{span}: UnboundName: `{name}` does not resolve to any scope")]
    UnboundName { span: Span, name: String },
    #[error("unknown entry function `{0}`")]
    UnknownEntry(String),
    #[error("line {line}: malformed IR text: {message}")]
    Text { line: usize, message: String },
    #[error("cannot override constant: {0}")]
    BadOverride(String),
    #[error("InternalCompileError: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RuntimeError {
    #[error("RuntimeFault in `{name}`: {message}")]
    Fault { name: String, message: String },
    #[error("UnknownExternal: no backend bound for `{0}`")]
    UnknownExternal(String),
    #[error("DeadlockFault: {0}")]
    Deadlock(String),
}

impl RuntimeError {
    pub(crate) fn fault(name: impl Into<String>, message: impl Into<String>) -> Self {
        RuntimeError::Fault { name: name.into(), message: message.into() }
    }

    /// Faults that indicate an interpreter bug rather than a program error.
    pub fn is_internal(&self) -> bool {
        matches!(self, RuntimeError::Deadlock(_))
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid runtime config: {0}")]
    Invalid(String),
    #[error("invalid runtime config JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TraceError {
    #[error("IncompleteTrace: call {call_id} (`{name}`) never resolved")]
    IncompleteTrace { call_id: u64, name: String },
    #[error("malformed trace line {line}: {message}")]
    Malformed { line: usize, message: String },
}
