use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("extremal bound violated: |a| = {spin} exceeds M = {mass}")]
    Extremal { mass: f64, spin: f64 },

    #[error("chart singularity at r = {r}, theta = {theta}: {reason}")]
    ChartSingularity { r: f64, theta: f64, reason: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("admissibility check failed: {0}")]
    Admissibility(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Numerical failures (as opposed to bad input) map to a distinct CLI exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence(_) | Error::Resolution(_) | Error::Singular(_)
        )
    }
}
