use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid marginal: {0}")]
    InvalidMarginal(String),
    #[error("call quotes admit static arbitrage: {0}")]
    NonConvexQuotes(String),
    #[error("call quotes do not determine a marginal: {0}")]
    InsufficientQuotes(String),
    #[error("implied mean {implied} differs from spot {s0}")]
    MeanMismatch { implied: f64, s0: f64 },
    #[error("lattice has {paths} paths, above the cap of {cap}")]
    SizeLimit { paths: usize, cap: usize },
    #[error("measures live on different lattices")]
    LatticeMismatch,
    #[error("malformed linear program: {0}")]
    MalformedProgram(String),
    #[error("the calibrated martingale polytope is empty")]
    InfeasiblePolytope,
    #[error("{solver} hit its iteration cap of {limit}")]
    IterationLimit { solver: &'static str, limit: usize },
    #[error("invalid search bracket ({lo}, {hi})")]
    BracketInvalid { lo: f64, hi: f64 },
    #[error("divergence is infinite: measure is not absolutely continuous w.r.t. the priors")]
    DivergenceInfinite,
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("price routes disagree: optimisation {optimisation}, bisection {bisection}")]
    CrossCheckFailed { optimisation: f64, bisection: f64 },
    #[error("harness limit: {0}")]
    HarnessLimit(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
}
