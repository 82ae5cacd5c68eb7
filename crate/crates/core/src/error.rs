use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("support point {index} has zero velocity under the requested twist; sample it as a facet instead")]
    FacetDegeneracy { index: usize },

    #[error("degenerate facet: {0}")]
    DegenerateFacet(String),

    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(u32),

    #[error("velocity direction undefined: gradient vanishes")]
    UndefinedDirection,

    #[error("expected a unit velocity, got norm {norm}")]
    NonUnitVelocity { norm: f64 },

    #[error("zero twist has no direction")]
    ZeroTwist,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("trajectory never came to rest")]
    NotAtRest,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
