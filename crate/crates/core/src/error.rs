use crate::Action;

/// Errors raised by the solvers, learners and generators.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    #[error("invalid stream spec: {0}")]
    InvalidSpec(String),

    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Action,
    },

    #[error("dual bracket exhausted: constraint still violated at lambda = {lambda_max} (h = {residual:e}); check G, L_f and R")]
    InfeasibleOrBadConstants { lambda_max: f64, residual: f64 },

    #[error("unsafe starting point: g_1(x_1) = {value:e} > 0")]
    UnsafeStart { value: f64 },

    #[error("degenerate constraint: {0}")]
    DegenerateConstraint(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
