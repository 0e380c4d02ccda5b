use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// The variants are grouped so the CLI can map them onto exit codes:
/// input problems (`Domain`, `Precondition`, `Config`, `Parse`) are
/// validation failures, everything else is a runtime failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: estimated error {achieved:e} above target {target:e}")]
    Quadrature { achieved: f64, target: f64 },

    #[error("admissibility certification failed: {inequality} violated at s = {at:e}")]
    Certification { inequality: String, at: f64 },

    #[error("initial-data parameters infeasible: {0}")]
    Infeasible(String),

    #[error("uniformity violated: {quantity} grew by factor {ratio:.4} at eta = {eta:e}")]
    Uniformity {
        quantity: String,
        eta: f64,
        ratio: f64,
    },

    #[error("negativity clipping budget of {budget} exhausted at t = {t:e}")]
    ClipBudget { budget: u64, t: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation error: {0}")]
    Config(String),

    #[error("refusing to run: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than by a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Precondition(_)
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::Refused(_)
                | Error::Infeasible(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
