use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),
    #[error("eigensolver residual {residual:e} exceeds tolerance {bound:e}")]
    Residual { residual: f64, bound: f64 },
    #[error("unknown symbol `{0}`")]
    Symbol(String),
    #[error("composition error: {0}")]
    Composition(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("edit error: {0}")]
    Edit(String),
    #[error("gauge error: {0}")]
    Gauge(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("hermiticity error: {0}")]
    Hermiticity(String),
    #[error("{line}:{column}: {kind}: {message}")]
    Parse {
        line: usize,
        column: usize,
        kind: ParseErrorKind,
        message: String,
    },
}

/// Classification of spec-file diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UndefinedName,
    DimensionMismatch,
    DuplicateDefinition,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UndefinedName => "undefined name",
            ParseErrorKind::DimensionMismatch => "dimension mismatch",
            ParseErrorKind::DuplicateDefinition => "duplicate definition",
        };
        f.write_str(s)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
