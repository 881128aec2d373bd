use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot associate {serving} serving APs out of {available}")]
    Association { serving: usize, available: usize },

    #[error("polynomial {poly:#b} is not primitive for register length {register_length} (period {period})")]
    NonPrimitivePolynomial {
        poly: u32,
        register_length: u32,
        period: usize,
    },

    #[error("unsupported spreading configuration: {0}")]
    Spreading(String),

    #[error("{requested} Monte Carlo draws requested, at least {minimum} are required")]
    TooFewDraws { requested: usize, minimum: usize },

    #[error("surrogate undefined: {0}")]
    SurrogateDomain(String),

    #[error("starting point is not strictly feasible: {0}")]
    NotStrictlyFeasible(String),

    #[error("constraint set is infeasible (best minimum slack {best_slack:e})")]
    Infeasible { best_slack: f64 },

    #[error("barrier method did not converge after {iterations} iterations (duality gap {gap:e})")]
    BarrierNotConverged { iterations: usize, gap: f64 },

    #[error("terminal {terminal} has zero aggregate large-scale fading")]
    ZeroLsf { terminal: usize },

    #[error("fractional power control exponent {0} outside [-1, 1]")]
    InvalidExponent(f64),

    #[error("invalid OMA split: {0}")]
    OmaSplit(String),

    #[error("empty sample series")]
    EmptySeries,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
