use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("{what} failed to converge on a {rows}x{cols} matrix")]
    NumericalFailure {
        what: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("measurements are not in the range of the operator (least-squares residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("invalid input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used on the CLI error line and by the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::FieldMismatch(_) => "field",
            Error::NumericalFailure { .. } => "numerical",
            Error::Degenerate(_) => "degenerate",
            Error::Precondition(_) => "precondition",
            Error::Infeasible { .. } => "infeasible",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure { .. } => 3,
            Error::Infeasible { .. } => 4,
            _ => 2,
        }
    }
}
