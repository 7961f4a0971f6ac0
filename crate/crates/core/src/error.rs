use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("SIR denominator is zero on link {from}->{to} (no interferers and no safety term)")]
    DegenerateDenominator { from: usize, to: usize },

    #[error("node {0} has zero generalized degree")]
    ZeroDegree(usize),

    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("graph too large for exhaustive enumeration: {n} nodes (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("Cheeger inequality violated: lower={lower}, h={h}, upper={upper}")]
    CheegerViolation { lower: f64, h: f64, upper: f64 },

    #[error("expansion point violates QoS: rate {rate} < threshold {threshold}")]
    InfeasibleExpansion { rate: f64, threshold: f64 },

    #[error("infeasible power allocation: {family}")]
    Infeasible { family: String },

    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),

    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("value out of range for `{field}`: {message}")]
    Range { field: String, message: String },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed trace: {0}")]
    Trace(String),
}

pub type Result<T> = std::result::Result<T, Error>;
