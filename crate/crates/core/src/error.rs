use thiserror::Error;

/// Errors surfaced by the numerical kernels and samplers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series evaluation diverged: {0}")]
    SeriesDivergence(String),

    #[error("evaluation point outside validity region: {0}")]
    ValidityRadius(String),

    #[error("root bracketing failed: {0}")]
    RootBracketing(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("analyticity strip violated: {0}")]
    StripViolation(String),

    #[error("grid support too narrow: {0}")]
    GridSupport(String),

    #[error("moment formula precondition failed: {0}")]
    MomentPrecondition(String),

    #[error("sampler limit exceeded: {0}")]
    SamplerLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
