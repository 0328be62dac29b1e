use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax { line: usize, col: usize, expected: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("type mismatch in `{expr}`: expected {expected}, found {found}")]
    TypeMismatch { expr: String, expected: String, found: String },
    #[error("infinite domain: {0}")]
    InfiniteDomain(String),
    #[error("empty index set: {0}")]
    EmptyIndex(String),
    #[error("conditional merge of a final and a quiescent atom")]
    KindMismatch,
    #[error("conjunction of quiescent atoms with different traces: {0} vs {1}")]
    TraceMismatch(String, String),
    #[error("normalization incomplete: {0}")]
    NormalizationIncomplete(String),
    #[error("weakest precondition of an iteration did not converge within {0} steps")]
    WpNotConverged(usize),
    #[error("loop body is not productive{}: {body}", at.as_ref().map(|s| format!(" at {s}")).unwrap_or_default())]
    NotProductive { body: String, at: Option<String> },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
