//! Adjoint system of the shifted time-optimal problem along a computed
//! trajectory, and the checks the explicit bounds depend on.
//!
//! With `L̂ = L(t̂, ŷ, ŵ)`, `ĝ = g(t̂, ŷ)` and `s = q + ⟨ĝŵ, p⟩`:
//!
//! ```text
//!   dq/dτ = −⟨ĝ_t ŵ, p⟩/(L̂+β) + s L̂_t/(L̂+β)²
//!   dp/dτ = −∇ₓ⟨ĝŵ, p⟩/(L̂+β) + s ∇ₓL̂/(L̂+β)²
//!   p(T̂) = 0
//!   ĝᵀp/(L̂+β) − s ∇_w L̂/(L̂+β)² = 0           (stationarity)
//!   s/(L̂+β) ≡ h > 0                            (constant Hamiltonian)
//! ```
//!
//! The multiplier is normalized by `h = 1`. `q` is integrated, never solved
//! for from the Hamiltonian identity, so the constancy check is not vacuous.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::certificate::{Certificate, Theorem};
use crate::error::{Error, Result};
use crate::numeric::{norm, Series};
use crate::problem::{ProblemSpec, Structure};
use crate::reparam::TimeOptimalTrajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointPath {
    pub tau: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Series,
    pub h: f64,
    /// Norm of the stationarity left side per node.
    pub stationarity: Vec<f64>,
    /// `(q + ⟨ĝŵ, p⟩)/(L̂+β)` per node.
    pub hamiltonian: Vec<f64>,
}

struct Frame {
    lb: f64,
    g: nalgebra::DMatrix<f64>,
    w: DVector<f64>,
    cost_dt: f64,
    cost_dx: DVector<f64>,
    cost_dw: DVector<f64>,
    g_dt: nalgebra::DMatrix<f64>,
    g_dx: Vec<nalgebra::DMatrix<f64>>,
}

impl Frame {
    fn new(spec: &ProblemSpec, beta: f64, t: f64, y: &[f64], w: &[f64]) -> Self {
        let grad = spec.cost_gradient(t, y, w);
        let ig = spec.input_gradient(t, y);
        Self {
            lb: spec.cost(t, y, w) + beta,
            g: spec.input(t, y),
            w: DVector::from_column_slice(w),
            cost_dt: grad.dt,
            cost_dx: grad.dx,
            cost_dw: grad.du,
            g_dt: ig.dt,
            g_dx: ig.dx,
        }
    }

    fn switching(&self, q: f64, p: &DVector<f64>) -> f64 {
        q + (&self.g * &self.w).dot(p)
    }

    /// `(dq/dτ, dp/dτ)`.
    fn rhs(&self, q: f64, p: &DVector<f64>) -> (f64, DVector<f64>) {
        let s = self.switching(q, p);
        let lb2 = self.lb * self.lb;
        let dq = -(&self.g_dt * &self.w).dot(p) / self.lb + s * self.cost_dt / lb2;
        let jt = DVector::from_iterator(p.len(), self.g_dx.iter().map(|gk| (gk * &self.w).dot(p)));
        let dp = -jt / self.lb + &self.cost_dx * (s / lb2);
        (dq, dp)
    }

    /// `|(L̂+β)⟨ĝŵ,p⟩ − s⟨∇_w L̂, ŵ⟩| / ((L̂+β)²(1+|ŵ|))`, the stationarity
    /// condition tested against `ŵ`.
    fn p44_residual(&self, q: f64, p: &DVector<f64>) -> f64 {
        let gwp = (&self.g * &self.w).dot(p);
        let identity = self.lb * gwp - self.switching(q, p) * self.cost_dw.dot(&self.w);
        identity.abs() / (self.lb * self.lb * (1.0 + self.w.norm()))
    }

    fn stationarity(&self, q: f64, p: &DVector<f64>) -> DVector<f64> {
        let s = self.switching(q, p);
        self.g.tr_mul(p) / self.lb - &self.cost_dw * (s / (self.lb * self.lb))
    }
}

fn frame_at(spec: &ProblemSpec, traj: &TimeOptimalTrajectory, j: usize, s: f64) -> Frame {
    let t = traj.t[j] + s * (traj.t[j + 1] - traj.t[j]);
    Frame::new(spec, traj.beta, t, &traj.y.lerp(j, s), &traj.w.lerp(j, s))
}

/// Integrates the adjoint system backward from `τ = T̂` with RK4, the
/// trajectory being linearly interpolated in `τ` between nodes.
pub fn integrate_adjoint(spec: &ProblemSpec, cert: &Certificate, traj: &TimeOptimalTrajectory) -> Result<AdjointPath> {
    if (traj.beta - cert.beta).abs() > 1e-12 * cert.beta.abs().max(1.0) {
        return Err(Error::Invalid(format!(
            "trajectory shift {} does not match certificate beta {}",
            traj.beta, cert.beta
        )));
    }
    let nodes = traj.nodes();
    let n = spec.dim_x();
    let h = 1.0;
    let mut q = vec![0.0; nodes];
    let mut p = Series::zeros(nodes, n);
    let last = nodes - 1;
    let end = Frame::new(spec, traj.beta, traj.t[last], traj.y.node(last), traj.w.node(last));
    q[last] = h * end.lb;

    let mut qc = q[last];
    let mut pc = DVector::zeros(n);
    for j in (0..last).rev() {
        let dt = traj.tau[j + 1] - traj.tau[j];
        let f_hi = frame_at(spec, traj, j, 1.0);
        let f_mid = frame_at(spec, traj, j, 0.5);
        let f_lo = frame_at(spec, traj, j, 0.0);
        let step = -dt;
        let (k1q, k1p) = f_hi.rhs(qc, &pc);
        let (k2q, k2p) = f_mid.rhs(qc + 0.5 * step * k1q, &(&pc + &k1p * (0.5 * step)));
        let (k3q, k3p) = f_mid.rhs(qc + 0.5 * step * k2q, &(&pc + &k2p * (0.5 * step)));
        let (k4q, k4p) = f_lo.rhs(qc + step * k3q, &(&pc + &k3p * step));
        qc += step / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        pc += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (step / 6.0);
        if !qc.is_finite() || pc.iter().any(|v| !v.is_finite()) {
            return Err(Error::AdjointBlowUp { node: j });
        }
        q[j] = qc;
        p.node_mut(j).copy_from_slice(pc.as_slice());
    }

    let mut stationarity = Vec::with_capacity(nodes);
    let mut hamiltonian = Vec::with_capacity(nodes);
    for j in 0..nodes {
        let f = Frame::new(spec, traj.beta, traj.t[j], traj.y.node(j), traj.w.node(j));
        let pj = DVector::from_column_slice(p.node(j));
        stationarity.push(f.stationarity(q[j], &pj).norm());
        hamiltonian.push(f.switching(q[j], &pj) / f.lb);
    }
    Ok(AdjointPath { tau: traj.tau.clone(), q, p, h, stationarity, hamiltonian })
}

/// Normalized residual of the identity obtained by multiplying the
/// stationarity condition by `ŵ`, per node.
pub fn p44_residuals(spec: &ProblemSpec, traj: &TimeOptimalTrajectory, adj: &AdjointPath) -> Vec<f64> {
    (0..traj.nodes())
        .map(|j| {
            let f = Frame::new(spec, traj.beta, traj.t[j], traj.y.node(j), traj.w.node(j));
            f.p44_residual(adj.q[j], &DVector::from_column_slice(adj.p.node(j)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmpTolerances {
    /// Stationarity residual allowance, scaled by `1 + |p|`.
    pub stationarity: f64,
    /// Relative deviation of the Hamiltonian from `h`.
    pub hamiltonian: f64,
    /// Allowed drift of `q` for autonomous problems.
    pub q_drift: f64,
    /// Nodes with `|p|` below this are skipped by the ratio check.
    pub ratio_p_floor: f64,
}

impl Default for PmpTolerances {
    fn default() -> Self {
        Self { stationarity: 1e-4, hamiltonian: 1e-4, q_drift: 1e-8, ratio_p_floor: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmpCheck {
    pub name: String,
    pub passed: bool,
    /// True when no node falls under the check's hypothesis.
    pub vacuous: bool,
    pub worst_node: Option<usize>,
    pub worst_value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmpReport {
    pub nodes: usize,
    pub total_time: f64,
    pub h: f64,
    pub checks: Vec<PmpCheck>,
}

impl PmpReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PmpCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tracks the node maximizing `value − limit` (so the worst node is the one
/// closest to, or furthest past, its limit).
struct Worst {
    name: &'static str,
    node: Option<usize>,
    value: f64,
    limit: f64,
    excess: f64,
    passed: bool,
}

impl Worst {
    fn new(name: &'static str) -> Self {
        Self { name, node: None, value: f64::NAN, limit: f64::NAN, excess: f64::NEG_INFINITY, passed: true }
    }

    /// Records `value ≤ limit` at `node`.
    fn at_most(&mut self, node: usize, value: f64, limit: f64) {
        let excess = value - limit;
        if !(value <= limit) {
            self.passed = false;
        }
        if excess > self.excess || excess.is_nan() {
            *self = Self { node: Some(node), value, limit, excess, ..*self };
        }
    }

    fn finish(self) -> PmpCheck {
        PmpCheck {
            name: self.name.into(),
            passed: self.passed,
            vacuous: self.node.is_none(),
            worst_node: self.node,
            worst_value: if self.node.is_some() { self.value } else { 0.0 },
            limit: if self.node.is_some() { self.limit } else { 0.0 },
        }
    }
}

/// Evaluates every adjoint-based check along the path.
pub fn residual_report(
    spec: &ProblemSpec,
    cert: &Certificate,
    traj: &TimeOptimalTrajectory,
    adj: &AdjointPath,
    tol: &PmpTolerances,
) -> PmpReport {
    let nodes = traj.nodes();
    let last = nodes - 1;
    let beta = traj.beta;
    let mu = spec.constants.mu;
    let xi = spec.constants.xi;
    let lemma4_radius = (cert.c + 1.0) / cert.t0;
    let p_cap = (cert.lambda0 + beta) * xi;

    let mut terminal = Worst::new("terminal-p");
    terminal.at_most(last, norm(adj.p.node(last)), 0.0);
    let mut positive = Worst::new("hamiltonian-positive");
    let mut nonzero = Worst::new("multiplier-nonzero");
    let mut stat = Worst::new("stationarity");
    let mut ham = Worst::new("hamiltonian-constant");
    let mut lemma4 = Worst::new("lemma4-large-control");
    let mut ratio = Worst::new("ratio-q-over-p");
    let mut size = Worst::new("multiplier-size");
    let mut horizon = Worst::new("horizon");
    let mut p44 = Worst::new("p44-identity");
    let mut quad = Worst::new("control-quadratic-bound");
    let mut drift = Worst::new("q-drift");
    let horizon_cap = cert.lambda0 + beta;
    horizon.at_most(last, traj.total_time, horizon_cap * (1.0 + 1e-12));

    let theorem2 = cert.theorem_used == Theorem::Theorem2;
    for j in 0..nodes {
        let f = Frame::new(spec, beta, traj.t[j], traj.y.node(j), traj.w.node(j));
        let pj = DVector::from_column_slice(adj.p.node(j));
        let pn = pj.norm();
        let qj = adj.q[j];
        let wn = f.w.norm();
        positive.at_most(j, -adj.hamiltonian[j], -f64::MIN_POSITIVE);
        nonzero.at_most(j, -(qj.abs() + pn), -f64::MIN_POSITIVE);
        stat.at_most(j, adj.stationarity[j], tol.stationarity * (1.0 + pn));
        ham.at_most(j, (adj.hamiltonian[j] - adj.h).abs() / adj.h, tol.hamiltonian);
        if qj <= 0.0 {
            // strict inequality |ŵ| > (c+1)/T0, stated as (c+1)/T0 − |ŵ| < 0
            lemma4.at_most(j, lemma4_radius - wn, -f64::MIN_POSITIVE);
        }
        if theorem2 && qj < 0.0 && pn >= tol.ratio_p_floor {
            ratio.at_most(j, qj.abs() / pn, cert.gamma.unwrap_or(f64::NAN));
        }
        size.at_most(j, pn / adj.h, p_cap * (1.0 + 1e-12));
        p44.at_most(j, f.p44_residual(qj, &pj), tol.stationarity * (1.0 + pn));
        let slack = if qj < 0.0 { qj.abs() / adj.h } else { 0.0 };
        let rhs = cert.lambda0 + beta + slack;
        quad.at_most(j, 0.5 * mu * wn * wn, rhs + 1e-9 * rhs.abs().max(1.0));
        if spec.structure == Structure::Autonomous {
            drift.at_most(j, (qj - adj.q[last]).abs(), tol.q_drift);
        }
    }

    PmpReport {
        nodes,
        total_time: traj.total_time,
        h: adj.h,
        checks: vec![
            terminal.finish(),
            positive.finish(),
            nonzero.finish(),
            stat.finish(),
            ham.finish(),
            lemma4.finish(),
            ratio.finish(),
            size.finish(),
            horizon.finish(),
            p44.finish(),
            quad.finish(),
            drift.finish(),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{certify, GridOptions, SamplingOptions};
    use crate::problem::builtin;
    use crate::reparam::to_time_optimal;
    use crate::solver::{solve, SolverOptions};
    use std::collections::BTreeMap;

    #[test]
    fn toy_adjoint_is_frozen() {
        let spec = builtin("toy-quadratic", &BTreeMap::new()).unwrap();
        let grid = GridOptions { t0: Some(0.5), ..Default::default() };
        let cert = certify(&spec, &grid, &SamplingOptions { samples: 200, ..Default::default() }).unwrap();
        let sol = solve(&spec, &SolverOptions { steps: 100, ..Default::default() }).unwrap();
        let traj = to_time_optimal(&spec, &sol, cert.beta, 101).unwrap();
        let adj = integrate_adjoint(&spec, &cert, &traj).unwrap();
        for j in 0..101 {
            assert!((adj.q[j] - (1.0 + cert.beta)).abs() < 1e-12);
            assert_eq!(adj.p.node(j), &[0.0]);
            assert_eq!(adj.stationarity[j], 0.0);
        }
        let rep = residual_report(&spec, &cert, &traj, &adj, &PmpTolerances::default());
        assert!(rep.all_passed(), "{rep:#?}");
        assert!(rep.get("lemma4-large-control").unwrap().vacuous);
    }

    #[test]
    fn mismatched_beta_is_rejected() {
        let spec = builtin("toy-quadratic", &BTreeMap::new()).unwrap();
        let cert = certify(&spec, &GridOptions::default(), &SamplingOptions { samples: 10, ..Default::default() }).unwrap();
        let sol = solve(&spec, &SolverOptions { steps: 10, ..Default::default() }).unwrap();
        let traj = to_time_optimal(&spec, &sol, cert.beta + 1.0, 11).unwrap();
        assert!(integrate_adjoint(&spec, &cert, &traj).is_err());
    }
}
