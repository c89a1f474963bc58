use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("problem evaluation failure: {what} is not finite at t={t}, x={x:?}, u={u:?}")]
    Evaluation {
        what: &'static str,
        t: f64,
        x: Vec<f64>,
        u: Vec<f64>,
    },

    #[error("unknown problem '{name}'; available: {}", available.join(", "))]
    UnknownProblem {
        name: String,
        available: Vec<&'static str>,
    },

    #[error("invalid parameter '{key}': {reason}")]
    Parameter { key: String, reason: String },

    #[error("growth witness too weak on probe range: theta({r_max})/{r_max} = {ratio} < 1")]
    WeakGrowth { r_max: f64, ratio: f64 },

    #[error("sigma bisection bracket not found below r = {r_max} for target {target}")]
    NoBracket { target: f64, r_max: f64 },

    #[error("cannot certify: beta > delta/xi = {threshold} unattainable on T0 grid")]
    BetaUnattainable { threshold: f64 },

    #[error("no theorem applies; certificate refused")]
    CertificateRefused,

    #[error("sup of r/(theta(r)+beta) not attained on [0, {r_max}]")]
    EtaUnbounded { r_max: f64 },

    #[error("dynamics blow-up at step {step}")]
    BlowUp { step: usize },

    #[error("reparameterization failed: L+beta not positive near t={t}")]
    NonMonotone { t: f64 },

    #[error("degenerate arc; inverse transform refused at node {node} (dt/dtau = {rate})")]
    DegenerateArc { node: usize, rate: f64 },

    #[error("adjoint blow-up at node {node}")]
    AdjointBlowUp { node: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}
