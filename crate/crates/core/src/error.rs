use thiserror::Error;

#[derive(Debug, Error)]
pub enum SwarmError {
    #[error("invalid model parameters: {0}")]
    BadParams(String),

    #[error("invalid ensemble: {0}")]
    BadEnsemble(String),

    #[error("particle {index} has zero velocity")]
    ZeroVelocityParticle { index: usize },

    #[error("zero velocity has no direction")]
    ZeroVelocity,

    #[error("invalid kernel parameters for `{name}`: {reason}")]
    BadKernelParams { name: String, reason: String },

    #[error("flow time {s} is at or before the blow-up time {blowup}")]
    FlowBlowup { s: f64, blowup: f64 },

    #[error("invalid speed band: {0}")]
    BadBand(String),

    #[error("test function support must avoid the origin and the equilibrium sphere: {0}")]
    UnsupportedPsi(String),

    #[error("point lies within the pole exclusion band (sin theta = {sin_theta})")]
    PoleSingularity { sin_theta: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("exact transport limited to {limit} atoms in total, got {total}; subsample instead")]
    TooLarge { total: usize, limit: usize },

    #[error("transport solver failed: {0}")]
    SolverFailed(String),

    #[error("no snapshot at t = {0}")]
    MissingSnapshot(f64),

    #[error("invalid run configuration: {0}")]
    BadConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SwarmError>;
