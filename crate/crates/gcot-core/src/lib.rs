/*!
Grand-canonical optimal transport on finite atomic supports.

A grand-canonical plan distributes probability over particle configurations of
*varying* size while reproducing a prescribed one-body density. This crate
solves the resulting optimization problems exactly at desk scale:

* [`plan`] — densities, occupation-indexed plans, Poisson states, localization;
* [`cost`] — pairwise kernels (Coulomb, Riesz, Lennard-Jones, ...),
  center-of-mass costs and stability probes;
* [`lp`] — the truncated primal problem and its dual, solved by a revised
  simplex over occupation columns, with an optional exact rational backend;
* [`halffill`] — half-filling instances reduced to extreme-point enumeration,
  the six-point diamond family and the multiscale construction;
* [`monge1d`] — the one-dimensional Monge plan for convex decreasing kernels;
* [`support`] — closed-form bounds on the particle-number support and the
  c-monotonicity checker, used as verifiers against LP output;
* [`entropic`] — Gibbs states, partition functions and the positive-temperature
  fixed-point solver.

Enumeration-heavy inner loops run on rayon when the `parallel` feature is
enabled (default) and fall back to sequential iteration otherwise; results are
bitwise identical either way.
*/

pub mod cost;
pub mod density;
pub mod entropic;
pub mod halffill;
pub mod lp;
pub mod monge1d;
pub(crate) mod par;
pub mod plan;
pub mod support;

pub use cost::{CostFamily, PairwiseCost, PreparedCost};
pub use density::DiscreteDensity;
pub use lp::{DualCertificate, LpSolution, SolveOptions};
pub use plan::{GCPlan, Occupation};

/// Schema tag stamped on every JSON document this crate reads or writes.
pub const SCHEMA: &str = "gcot/v1";

/// Errors shared by the whole crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid cost parameters: {0}")]
    InvalidCost(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("configuration count {0} exceeds cap {1}")]
    SizeCap(usize, usize),
    #[error("LP unbounded; the cost family is not stable")]
    Unbounded,
    #[error("no convergence after {iterations} iterations (best residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
