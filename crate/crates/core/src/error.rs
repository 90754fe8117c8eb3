use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Qubit count, vector length or dimension out of range or mismatched.
    #[error("size error: {0}")]
    Size(String),

    /// Qubit or parameter index out of range.
    #[error("index error: {0}")]
    Index(String),

    /// Malformed JSON document.
    #[error("parse error: {0}")]
    Parse(String),

    /// Well-formed document that violates the Hamiltonian schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A state that violates a precondition (e.g. not unit norm).
    #[error("state error: {0}")]
    State(String),

    /// Lanczos did not converge; carries the best Ritz value found.
    #[error("eigensolver did not converge after {iterations} iterations (best estimate {best})")]
    Convergence { best: f64, iterations: usize },

    #[error("argument error: {0}")]
    Argument(String),

    #[error("config error: {0}")]
    Config(String),

    /// Non-finite value encountered during optimization.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad user input rather than by the computation itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Schema(_) | Error::Argument(_) | Error::Config(_)
        )
    }
}
