//! Direct single shooting for the free-endpoint Lagrange problem.
//!
//! The control is a piecewise-linear function with values at `N + 1` uniform
//! nodes. The state is propagated with classical RK4 (control interpolated at
//! the half step), the cost is the trapezoid rule on the nodes, and the
//! gradient is the exact reverse-mode derivative of that discrete cost. The
//! reported gradient is the Riesz representative in the trapezoid-weighted
//! inner product, so it approximates the continuous `∇ᵤL + gᵀλ`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::numeric::{norm, trapezoid_weights, Series};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Number of time steps; the grid has `steps + 1` nodes.
    pub steps: usize,
    /// Stop when the max-norm of the gradient is at most this.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { steps: 1000, tol: 1e-8, max_iter: 10_000, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution {
    pub grid: Vec<f64>,
    pub u: Series,
    pub x: Series,
    pub cost: f64,
    pub grad_norm_final: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after every accepted iteration, starting with the initial guess.
    pub cost_history: Vec<f64>,
}

impl ControlSolution {
    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.max_norm()
    }

    pub fn max_abs_x(&self) -> f64 {
        self.x.max_norm()
    }

    /// Trapezoid approximation of `∫₀¹ |u| dt`.
    pub fn l1_norm_u(&self) -> f64 {
        let w = trapezoid_weights(self.steps());
        self.u.iter().zip(&w).map(|(u, w)| w * norm(u)).sum()
    }
}

/// Uniform grid on `[0,1]`.
pub fn uniform_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

fn axpy(x: &[f64], a: f64, k: &DVector<f64>) -> Vec<f64> {
    x.iter().zip(k.iter()).map(|(x, k)| x + a * k).collect()
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// One RK4 step of `ẋ = g(t,x)u` with `u` linear on the step.
fn rk4_step(p: &ProblemSpec, t: f64, h: f64, x: &[f64], ua: &[f64], ub: &[f64]) -> Vec<f64> {
    let um = midpoint(ua, ub);
    let k1 = p.velocity(t, x, ua);
    let k2 = p.velocity(t + 0.5 * h, &axpy(x, 0.5 * h, &k1), &um);
    let k3 = p.velocity(t + 0.5 * h, &axpy(x, 0.5 * h, &k2), &um);
    let k4 = p.velocity(t + h, &axpy(x, h, &k3), ub);
    let incr = (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
    axpy(x, 1.0, &incr)
}

/// Vector–Jacobian product of [`rk4_step`]: given `∂J/∂x_{i+1}` returns
/// `(∂J/∂x_i, ∂J/∂u_i, ∂J/∂u_{i+1})` contributions through this step.
fn rk4_step_vjp(
    p: &ProblemSpec,
    t: f64,
    h: f64,
    x: &[f64],
    ua: &[f64],
    ub: &[f64],
    bar: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let um = midpoint(ua, ub);
    let (tm, te) = (t + 0.5 * h, t + h);
    let k1 = p.velocity(t, x, ua);
    let z2 = axpy(x, 0.5 * h, &k1);
    let k2 = p.velocity(tm, &z2, &um);
    let z3 = axpy(x, 0.5 * h, &k2);
    let k3 = p.velocity(tm, &z3, &um);
    let z4 = axpy(x, h, &k3);

    let mut bx = bar.clone();
    let bk1 = bar * (h / 6.0);
    let mut bk2 = bar * (h / 3.0);
    let mut bk3 = bar * (h / 3.0);
    let bk4 = bar * (h / 6.0);

    let bz4 = p.velocity_jacobian_t(te, &z4, ub, &bk4);
    let mut bub = p.input(te, &z4).tr_mul(&bk4);
    bx += &bz4;
    bk3 += &bz4 * h;

    let bz3 = p.velocity_jacobian_t(tm, &z3, &um, &bk3);
    let mut bum = p.input(tm, &z3).tr_mul(&bk3);
    bx += &bz3;
    bk2 += &bz3 * (0.5 * h);

    let bz2 = p.velocity_jacobian_t(tm, &z2, &um, &bk2);
    bum += p.input(tm, &z2).tr_mul(&bk2);
    bx += &bz2;
    let bk1 = bk1 + &bz2 * (0.5 * h);

    bx += p.velocity_jacobian_t(t, x, ua, &bk1);
    let mut bua = p.input(t, x).tr_mul(&bk1);
    bua += &bum * 0.5;
    bub += &bum * 0.5;
    (bx, bua, bub)
}

/// Forward RK4 from `x(0) = 0`.
pub fn integrate_state(p: &ProblemSpec, u: &Series) -> Result<Series> {
    if u.dim != p.dim_u() {
        return Err(Error::Dimension { what: "control grid", expected: p.dim_u(), got: u.dim });
    }
    if u.len() < 2 {
        return Err(Error::Invalid("control grid needs at least two nodes".into()));
    }
    let steps = u.len() - 1;
    let h = 1.0 / steps as f64;
    let mut x = Series::zeros(steps + 1, p.dim_x());
    for i in 0..steps {
        let next = rk4_step(p, i as f64 * h, h, x.node(i), u.node(i), u.node(i + 1));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: i });
        }
        x.node_mut(i + 1).copy_from_slice(&next);
    }
    Ok(x)
}

fn trapezoid_cost(p: &ProblemSpec, u: &Series, x: &Series, w: &[f64]) -> f64 {
    let steps = u.len() - 1;
    (0..=steps)
        .map(|i| w[i] * p.cost(i as f64 / steps as f64, x.node(i), u.node(i)))
        .sum()
}

/// Cost only.
pub fn cost(p: &ProblemSpec, u: &Series) -> Result<f64> {
    let x = integrate_state(p, u)?;
    let w = trapezoid_weights(u.len() - 1);
    Ok(trapezoid_cost(p, u, &x, &w))
}

/// Cost and its gradient (trapezoid-weighted Riesz representative) with
/// respect to the nodal control values.
pub fn cost_and_gradient(p: &ProblemSpec, u: &Series) -> Result<(f64, Series)> {
    let x = integrate_state(p, u)?;
    let steps = u.len() - 1;
    let h = 1.0 / steps as f64;
    let w = trapezoid_weights(steps);
    let j = trapezoid_cost(p, u, &x, &w);

    let mut grad = Series::zeros(steps + 1, p.dim_u());
    let last = p.cost_gradient(1.0, x.node(steps), u.node(steps));
    let mut lambda = &last.dx * w[steps];
    for (g, d) in grad.node_mut(steps).iter_mut().zip(last.du.iter()) {
        *g += w[steps] * d;
    }
    for i in (0..steps).rev() {
        let t = i as f64 * h;
        let (bx, bua, bub) = rk4_step_vjp(p, t, h, x.node(i), u.node(i), u.node(i + 1), &lambda);
        let local = p.cost_gradient(t, x.node(i), u.node(i));
        lambda = bx + &local.dx * w[i];
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: i });
        }
        for (k, g) in grad.node_mut(i).iter_mut().enumerate() {
            *g += bua[k] + w[i] * local.du[k];
        }
        for (k, g) in grad.node_mut(i + 1).iter_mut().enumerate() {
            *g += bub[k];
        }
    }
    for (i, wi) in w.iter().enumerate() {
        grad.node_mut(i).iter_mut().for_each(|g| *g /= wi);
    }
    Ok((j, grad))
}

fn max_abs(s: &Series) -> f64 {
    s.data.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn weighted_sq(s: &Series, w: &[f64]) -> f64 {
    s.iter().zip(w).map(|(g, w)| w * g.iter().map(|v| v * v).sum::<f64>()).sum()
}

/// Steepest descent in the trapezoid-weighted metric with Armijo backtracking
/// (halving from a unit step), started from `u ≡ 0`.
///
/// Once the predicted Armijo decrease is below the rounding resolution of
/// the cost, a step is accepted if it does not increase the cost by more than
/// that resolution and strictly reduces the gradient norm.
pub fn solve(p: &ProblemSpec, opts: &SolverOptions) -> Result<ControlSolution> {
    if opts.steps < 2 {
        return Err(Error::Invalid("solver needs at least two steps".into()));
    }
    let w = trapezoid_weights(opts.steps);
    let mut u = Series::zeros(opts.steps + 1, p.dim_u());
    let (mut j, mut grad) = cost_and_gradient(p, &u)?;
    let mut history = vec![j];
    let mut iterations = 0;
    let mut gnorm = max_abs(&grad);
    while gnorm > opts.tol && iterations < opts.max_iter {
        let slope = weighted_sq(&grad, &w);
        let resolution = 8.0 * f64::EPSILON * j.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-12 {
            let trial = Series {
                dim: u.dim,
                data: u.data.iter().zip(&grad.data).map(|(a, g)| a - step * g).collect(),
            };
            if let Ok((jt, gt)) = cost_and_gradient(p, &trial) {
                let predicted = opts.armijo * step * slope;
                let ok = if predicted > resolution {
                    jt <= j - predicted
                } else {
                    jt <= j + resolution && max_abs(&gt) < gnorm
                };
                if ok {
                    accepted = Some((trial, jt, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, jt, gt)) = accepted else {
            break;
        };
        u = trial;
        j = jt;
        grad = gt;
        gnorm = max_abs(&grad);
        history.push(j);
        iterations += 1;
    }
    let x = integrate_state(p, &u)?;
    Ok(ControlSolution {
        grid: uniform_grid(opts.steps),
        u,
        x,
        cost: j,
        grad_norm_final: gnorm,
        iterations,
        converged: gnorm <= opts.tol,
        cost_history: history,
    })
}

/// Checks of a computed solution against a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionChecks {
    pub max_abs_u: f64,
    pub ell: f64,
    pub bound_holds: bool,
    pub l1_norm_u: f64,
    pub c: f64,
    pub l1_budget_holds: bool,
    pub max_abs_x: f64,
    pub state_radius: f64,
    pub state_bound_holds: bool,
}

impl SolutionChecks {
    pub fn new(sol: &ControlSolution, cert: &Certificate) -> Self {
        let max_abs_u = sol.max_abs_u();
        let l1 = sol.l1_norm_u();
        let max_x = sol.max_abs_x();
        Self {
            max_abs_u,
            ell: cert.ell,
            bound_holds: max_abs_u <= cert.ell,
            l1_norm_u: l1,
            c: cert.c,
            l1_budget_holds: l1 <= cert.c + 1e-6,
            max_abs_x: max_x,
            state_radius: cert.r_omega,
            state_bound_holds: max_x <= cert.r_omega + 1e-6,
        }
    }

    pub fn all_hold(&self) -> bool {
        self.bound_holds && self.l1_budget_holds && self.state_bound_holds
    }
}
