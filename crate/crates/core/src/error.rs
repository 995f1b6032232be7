use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("undeclared symbol '{0}'")]
    UndeclaredSymbol(String),

    #[error("singular evaluation at '{0}'")]
    Singular(String),

    #[error("chart mismatch: {0}")]
    ChartMismatch(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("rank still growing after {0} completion rounds")]
    IterationCap(usize),

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error("not projectable: {0}")]
    NotProjectable(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("Jacobi identity violated: {0}")]
    Jacobi(String),

    #[error("normalization not implemented for this algebra type: {0}")]
    NotImplementedForType(String),

    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("left the admissible domain: {0}")]
    LeftDomain(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
