//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by model fitting, estimation, and inference routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A basis component is undefined at an observed value.
    #[error("basis component `{component}` undefined at x = {x}")]
    Domain { component: String, x: f64 },

    /// The pooled basis design matrix does not have full column rank.
    #[error("basis columns are linearly dependent on the pooled data")]
    RankDeficient,

    /// Newton iteration exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    /// Population index out of range.
    #[error("population index {index} out of range (have {len} populations)")]
    Index { index: usize, len: usize },

    /// Quantile or confidence level outside the open interval (0, 1).
    #[error("level {value} outside the open interval (0, 1)")]
    Level { value: f64 },

    /// The information matrix W is numerically singular.
    #[error("information matrix W is numerically singular")]
    SingularW,

    /// Quadrature setup failed validation.
    #[error("quadrature error: {0}")]
    Quadrature(String),

    /// A density value is zero or negative where positivity is required.
    #[error("density value is zero or negative")]
    DensityZero,

    /// A fitted distribution has no spread.
    #[error("fitted distribution is degenerate (zero spread)")]
    DegenerateDistribution,

    /// Invalid distribution or configuration parameter.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A difference interval refers twice to the same quantile.
    #[error("difference interval targets the same population and level twice")]
    SameTarget,

    /// Invalid multi-sample data.
    #[error("invalid sample data: {0}")]
    InvalidData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
