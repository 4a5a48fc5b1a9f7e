use thiserror::Error;

use crate::bridge::BridgePotentials;
use crate::interp::InterpolationResult;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} is outside the open domain of {what}")]
    DomainViolation { what: String, point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("sampling plan produced no points")]
    EmptySample,

    #[error("straight segment between the endpoints leaves the domain; supply a feasible initial path")]
    LineSegmentExitsDomain,

    #[error("no convergence after {iterations} iterations (gradient sup-norm {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Option<Box<InterpolationResult>>,
    },

    #[error("shooting diverged ({0}); use minimize_direct instead")]
    ShootingDiverged(String),

    #[error("potential is not normalized at x_star: F = {value:e}, |F'| = {gradient:e}")]
    NormalizationError { value: f64, gradient: f64 },

    #[error("finite-difference derivative unstable: {coarse:e} vs {fine:e}")]
    FdUnstable { coarse: f64, fine: f64 },

    #[error("density has no positive mass")]
    NonPositive,

    #[error("Renyi order p = 1 is not allowed")]
    BadOrder,

    #[error("time derivative does not conserve mass (total {0:e})")]
    MassNotConserved(f64),

    #[error("explicit step dt = {dt:e} exceeds stability limit {limit:e}")]
    StabilityViolation { dt: f64, limit: f64 },

    #[error("mass near the circle cut is {0:e} (> 1e-6)")]
    CutViolation(f64),

    #[error("heat kernel numerically degenerate: {0}")]
    KernelDegenerate(String),

    #[error("Sinkhorn did not converge after {iterations} iterations (marginal error {:e})", best.marginal_error)]
    SinkhornNoConvergence {
        iterations: usize,
        best: Box<BridgePotentials>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
