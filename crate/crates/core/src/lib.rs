//! Explicit a-priori bounds on the optimal control of free-endpoint Lagrange
//! problems, and the numerical machinery that cross-checks them: a
//! single-shooting solver, the time reparameterization into a time-optimal
//! problem, the relaxed velocity map of that problem, and the adjoint system
//! whose conditions the bounds rest on.

pub mod certificate;
pub mod error;
pub mod inclusion;
pub mod numeric;
pub mod pmp;
pub mod problem;
pub mod reparam;
pub mod solver;

pub use certificate::{certify, Certificate, ConditionReport, GridOptions, SamplingOptions, Theorem};
pub use error::{Error, Result};
pub use numeric::Series;
pub use problem::{builtin, ProblemSpec, Structure, BUILTIN_NAMES};
pub use solver::{solve, ControlSolution, SolverOptions};
pub use inclusion::{support_function, InclusionProbe};
pub use pmp::{integrate_adjoint, residual_report, AdjointPath, PmpReport};
pub use reparam::{from_time_optimal, to_time_optimal, TimeOptimalTrajectory};
