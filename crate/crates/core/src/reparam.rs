//! Change of independent variable `τ(t) = ∫₀ᵗ (L + β) ds`, which turns the
//! Lagrange problem into the time-optimal system
//!
//! ```text
//!   d(t, y)/dτ = (1, g(t, y) w) / (L(t, y, w) + β),   (t, y)(0) = (0, 0),   t(T) = 1
//! ```
//!
//! and back. `β = 0` gives the unshifted system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{locate, Series};
use crate::problem::ProblemSpec;
use crate::solver::{integrate_state, uniform_grid, ControlSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeOptimalTrajectory {
    /// Uniform grid on `[0, T]`.
    pub tau: Vec<f64>,
    pub t: Vec<f64>,
    pub y: Series,
    pub w: Series,
    pub total_time: f64,
    pub beta: f64,
}

impl TimeOptimalTrajectory {
    pub fn nodes(&self) -> usize {
        self.tau.len()
    }

    /// `dt/dτ` at each node, from the adjacent segment slopes (the smaller
    /// one at interior nodes).
    pub fn time_rates(&self) -> Vec<f64> {
        let slopes: Vec<f64> = self
            .tau
            .windows(2)
            .zip(self.t.windows(2))
            .map(|(a, b)| (b[1] - b[0]) / (a[1] - a[0]))
            .collect();
        let last = slopes.len() - 1;
        (0..self.nodes())
            .map(|j| match j {
                0 => slopes[0],
                j if j > last => slopes[last],
                j => slopes[j - 1].min(slopes[j]),
            })
            .collect()
    }
}

/// Cumulative trapezoid of `L + β` along the solution nodes.
pub fn clock(p: &ProblemSpec, sol: &ControlSolution, beta: f64) -> Result<Vec<f64>> {
    let density: Vec<f64> = sol
        .grid
        .iter()
        .zip(sol.x.iter().zip(sol.u.iter()))
        .map(|(&t, (x, u))| p.cost(t, x, u) + beta)
        .collect();
    let mut tau = Vec::with_capacity(density.len());
    tau.push(0.0);
    for i in 0..density.len() - 1 {
        let dt = sol.grid[i + 1] - sol.grid[i];
        let next = tau[i] + 0.5 * dt * (density[i] + density[i + 1]);
        if !(next > tau[i]) {
            return Err(Error::NonMonotone { t: sol.grid[i] });
        }
        tau.push(next);
    }
    Ok(tau)
}

/// Maps a solution of the Lagrange problem onto `nodes` uniform points of
/// the time-optimal clock, inverting `τ(t)` by monotone linear interpolation.
pub fn to_time_optimal(p: &ProblemSpec, sol: &ControlSolution, beta: f64, nodes: usize) -> Result<TimeOptimalTrajectory> {
    if nodes < 2 {
        return Err(Error::Invalid("time-optimal grid needs at least two nodes".into()));
    }
    if !(beta >= 0.0) {
        return Err(Error::Invalid(format!("beta must be nonnegative, got {beta}")));
    }
    let clock = clock(p, sol, beta)?;
    let total_time = *clock.last().expect("clock has nodes");
    let mut tau = Vec::with_capacity(nodes);
    let mut t = Vec::with_capacity(nodes);
    let mut y = Series::zeros(nodes, sol.x.dim);
    let mut w = Series::zeros(nodes, sol.u.dim);
    for j in 0..nodes {
        let s_tau = if j + 1 == nodes { total_time } else { total_time * j as f64 / (nodes - 1) as f64 };
        let (i, s) = locate(&clock, s_tau);
        tau.push(s_tau);
        t.push(sol.grid[i] + s * (sol.grid[i + 1] - sol.grid[i]));
        y.node_mut(j).copy_from_slice(&sol.x.lerp(i, s));
        w.node_mut(j).copy_from_slice(&sol.u.lerp(i, s));
    }
    t[0] = 0.0;
    t[nodes - 1] = 1.0;
    Ok(TimeOptimalTrajectory { tau, t, y, w, total_time, beta })
}

/// Recovers `(u, x)` on the uniform `steps`-step grid of `[0,1]`.
pub fn from_time_optimal(traj: &TimeOptimalTrajectory, steps: usize) -> Result<(Series, Series)> {
    const MIN_RATE: f64 = 1e-12;
    if let Some((node, &rate)) = traj.time_rates().iter().enumerate().find(|(_, r)| !(**r > MIN_RATE)) {
        return Err(Error::DegenerateArc { node, rate });
    }
    let grid = uniform_grid(steps);
    let mut u = Series::zeros(steps + 1, traj.w.dim);
    let mut x = Series::zeros(steps + 1, traj.y.dim);
    for (i, &ti) in grid.iter().enumerate() {
        let (j, s) = locate(&traj.t, ti);
        u.node_mut(i).copy_from_slice(&traj.w.lerp(j, s));
        x.node_mut(i).copy_from_slice(&traj.y.lerp(j, s));
    }
    Ok((u, x))
}

/// Largest gap between `x` and the RK4 state driven by `u`.
pub fn dynamics_residual(p: &ProblemSpec, u: &Series, x: &Series) -> Result<f64> {
    let xr = integrate_state(p, u)?;
    Ok(xr.data.iter().zip(&x.data).fold(0.0, |a, (p, q)| a.max((p - q).abs())))
}

/// Sup-norm distance between `sol.u` and its image under a round trip
/// through the time-optimal system on `nodes` points.
pub fn round_trip_error(p: &ProblemSpec, sol: &ControlSolution, beta: f64, nodes: usize) -> Result<f64> {
    let traj = to_time_optimal(p, sol, beta, nodes)?;
    let (u, _) = from_time_optimal(&traj, sol.steps())?;
    Ok(u.data.iter().zip(&sol.u.data).fold(0.0, |a, (p, q)| a.max((p - q).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin;
    use crate::solver::{solve, SolverOptions};
    use std::collections::BTreeMap;

    fn solved(name: &str, steps: usize) -> (ProblemSpec, ControlSolution) {
        let p = builtin(name, &BTreeMap::new()).unwrap();
        let sol = solve(&p, &SolverOptions { steps, ..Default::default() }).unwrap();
        (p, sol)
    }

    #[test]
    fn toy_clock_is_identity() {
        let (p, sol) = solved("toy-quadratic", 50);
        let traj = to_time_optimal(&p, &sol, 0.0, 51).unwrap();
        assert!((traj.total_time - 1.0).abs() < 1e-14);
        for (a, b) in traj.tau.iter().zip(&traj.t) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(traj.y.max_norm(), 0.0);
        let (u, x) = from_time_optimal(&traj, 50).unwrap();
        assert_eq!(u, sol.u);
        assert_eq!(x, sol.x);
    }

    #[test]
    fn shifted_clock_adds_beta() {
        let (p, sol) = solved("lq-tracking", 400);
        let traj = to_time_optimal(&p, &sol, 6.13, 401).unwrap();
        assert!((traj.total_time - (sol.cost + 6.13)).abs() < 1e-12);
        assert!(traj.t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!((traj.t[0], traj.t[400]), (0.0, 1.0));
    }

    #[test]
    fn degenerate_arc_is_refused() {
        let (p, sol) = solved("toy-quadratic", 10);
        let mut traj = to_time_optimal(&p, &sol, 0.0, 11).unwrap();
        traj.t[5] = traj.t[4];
        assert!(matches!(from_time_optimal(&traj, 10), Err(Error::DegenerateArc { node: 4, .. })));
    }

    #[test]
    fn nonpositive_density_is_refused() {
        let (p, sol) = solved("toy-quadratic", 10);
        let mut bad = sol.clone();
        bad.u.data.iter_mut().for_each(|v| *v = f64::NAN);
        assert!(matches!(clock(&p, &bad, 0.0), Err(Error::NonMonotone { .. })));
    }
}
