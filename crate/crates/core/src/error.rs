use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("resolvent at lambda={lambda} is singular (residual {residual:.3e})")]
    SingularResolvent { lambda: f64, residual: f64 },
    #[error("Neumann series diverges: {0}")]
    DivergentSeries(String),
    #[error("negative time t={0}")]
    NegativeTime(f64),
    #[error("model is not rescaled: growth bound {0} >= 0")]
    NotRescaled(f64),
    #[error("fixed-point iteration diverges after {iterations} iterations (last increment {increment:.3e})")]
    DivergentIteration { iterations: usize, increment: f64 },
    #[error("tail does not decay (estimated rate {0})")]
    NonDecayingTail(f64),
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("domination violated by {0:.3e}")]
    DominationViolated(f64),
    #[error("boundary value problem at lambda={0} is singular")]
    SingularBVP(f64),
    #[error("representations disagree by {0:.3e}")]
    InconsistentRepresentations(f64),
    #[error("grids are not compatible: {0}")]
    EmbeddingMismatch(String),
    #[error("alpha={0} outside [1, 2)")]
    BadAlpha(f64),
    #[error("operator is not positive (min entry {0:.3e})")]
    NotPositiveOperator(f64),
    #[error("time step {step} is not a multiple of the grid spacing {spacing}")]
    IncompatibleTimeStep { step: f64, spacing: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of numerical convergence, as opposed to violated hypotheses.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::DivergentSeries(_) | Error::DivergentIteration { .. } | Error::NonDecayingTail(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
