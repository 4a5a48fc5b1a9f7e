//! Numerical laboratory for εF-interpolations and entropic interpolations.
//!
//! * [`potential`]: free energies on `R^n` and (ρ, n)-convexity certificates.
//! * [`flow`]: the gradient-flow semigroup and its dissipation identity.
//! * [`interp`]: the εF-cost by direct minimization and by shooting, plus the
//!   Hamilton–Jacobi value and the dual formulation.
//! * [`ineq`]: contraction, convexity, Talagrand, Costa and EVI verifiers.
//! * [`measure`]: densities on the periodic grid, the exact discrete heat
//!   semigroup and Wasserstein gradient flows.
//! * [`bridge`]: Sinkhorn potentials, entropic interpolations and costs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
mod error;
pub mod flow;
pub mod ineq;
pub mod interp;
pub mod io;
pub mod measure;
pub mod par;
pub mod potential;

pub use error::{Error, Result};
