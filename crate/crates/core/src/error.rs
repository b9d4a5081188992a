use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error(
        "cannot parse law `{0}`: expected pareto(alpha,xm), paretolog(alpha,xm,beta) or exp(rate)"
    )]
    LawSyntax(String),

    #[error("infinite-mean regime: {0} has no finite mean")]
    InfiniteMean(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("root finding did not converge for u = {0}")]
    RootFinding(f64),

    #[error("non-finite forcing value {value} at grid index {index}")]
    NonFiniteForcing { index: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("replication {index} exceeded the draw limit of {limit}")]
    DrawLimit { index: usize, limit: u64 },

    #[error("empty sample")]
    EmptySample,

    #[error("non-finite sample value at position {0}")]
    NonFiniteSample(usize),
}
