use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (defect {defect:e})")]
    Asymmetric { defect: f64 },

    #[error("vectorized Lyapunov operator is singular (system on the stability boundary)")]
    SingularOperator,

    #[error("stability routes disagree: Lyapunov route says {lyapunov}, spectral abscissa {abscissa:e}")]
    InconsistentRoutes { lyapunov: bool, abscissa: f64 },

    #[error("no stabilizer found within {budget} restarts")]
    NotFound { budget: usize },

    #[error("[A, C] is not mean-square stable")]
    NotStable,

    #[error("drift matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },

    #[error("path {path} diverged at t = {time} (|X| > 1e12)")]
    Diverged { path: usize, time: f64 },

    #[error("saddle inequality violated in perturbation arm {arm} (excess {excess:e} beyond 3 SE)")]
    SaddleViolation { arm: usize, excess: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
