use thiserror::Error;

/// Errors raised by the analysis, simulation and distance routines.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type in use.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite integrand value at abscissa {abscissa}")]
    NonFiniteIntegrand { abscissa: f64 },

    #[error("target {target} is outside the reachable range; largest reachable value is {max_reachable}")]
    Range { target: f64, max_reachable: f64 },

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("precondition violated at radius {radius}: {reason}")]
    Precondition { radius: f64, reason: String },

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
