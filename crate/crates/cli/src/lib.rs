//! Pipeline driver for the `lagbound` command: certificate, solver,
//! time-optimal reparameterization, adjoint checks and inclusion probes,
//! each writing deterministic JSON/CSV artifacts.

pub mod artifacts;
pub mod config;
pub mod pipeline;

pub use config::{EmitFlags, ProbeOptions, RunConfig, TheoremSelector};
pub use pipeline::{run_certify, run_pipeline, run_solve, run_verify, RunOutcome, Stage, Summary};
