//! Constants pipeline and explicit control bound.
//!
//! From the problem data this computes, in order: the growth threshold `r0`,
//! the a-priori `L1` budget `c`, the state region `Ω = [0,1] × c_g·c·B`,
//! the extremal values `Λ₀`, `Λ₁` over `Ω`, the excess function `σ`, a time
//! fraction `T0` with shift `β = σ((c+1)/T0) > δ/ξ`, and finally the bound
//! `ℓ` on the optimal control. Every maximization is a dense grid followed by
//! one golden-section pass per coordinate, so the result is a numerical
//! certificate, not an interval-verified one.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cube_to_ball, directions, golden_max, linspace, norm, operator_norm, simpson, Halton};
use crate::problem::{Constants, ProblemSpec, Structure};

/// Grid resolutions and search policies. Stored in the certificate so the
/// numerical provenance of each constant is visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridOptions {
    pub r0_max: f64,
    pub r0_grid_n: usize,
    pub quadrature_panels: usize,
    /// Points per axis of the `(t, x)` grid over `Ω` when `n = 1`.
    pub omega_grid_n: usize,
    /// Points per axis when `n > 1`.
    pub omega_grid_n_multi: usize,
    /// Points per `(t, x)` axis for `σ`.
    pub sigma_grid_n: usize,
    /// Radial shells of the control ball for `σ`.
    pub sigma_shells: usize,
    /// Quasi-random control directions added to the signed axes when `m > 1`.
    pub extra_directions: usize,
    pub sigma_r_max: f64,
    pub t0_margin: f64,
    /// Use this `T0` instead of scanning the grid.
    pub t0: Option<f64>,
    pub eta_r_max: f64,
    pub eta_grid_n: usize,
    pub refine_tol: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            r0_max: 1e3,
            r0_grid_n: 1000,
            quadrature_panels: 1000,
            omega_grid_n: 401,
            omega_grid_n_multi: 21,
            sigma_grid_n: 101,
            sigma_shells: 16,
            extra_directions: 32,
            sigma_r_max: 1e6,
            t0_margin: 1e-9,
            t0: None,
            eta_r_max: 1e6,
            eta_grid_n: 2000,
            refine_tol: 1e-10,
        }
    }
}

/// `Ω = [0,1] × radius·B`. Autonomous problems collapse the time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Omega {
    pub radius: f64,
    pub dim: usize,
    pub time_dependent: bool,
}

/// Location and value of a maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Argmax {
    pub value: f64,
    pub t: f64,
    pub x: Vec<f64>,
}

impl Omega {
    pub fn new(problem: &ProblemSpec, radius: f64) -> Self {
        Self {
            radius,
            dim: problem.dim_x(),
            time_dependent: problem.structure != Structure::Autonomous,
        }
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        (0.0..=1.0).contains(&t) && norm(x) <= self.radius * (1.0 + 1e-12)
    }

    fn time_nodes(&self, n: usize) -> Vec<f64> {
        if self.time_dependent {
            linspace(0.0, 1.0, n.max(2))
        } else {
            vec![0.0]
        }
    }

    /// Cartesian grid of the cube `[-R, R]^n` restricted to the ball.
    fn state_nodes(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let axis = linspace(-self.radius, self.radius, per_axis.max(2));
        let mut out = vec![Vec::with_capacity(self.dim)];
        for _ in 0..self.dim {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        out.retain(|x| norm(x) <= self.radius * (1.0 + 1e-12));
        out
    }

    /// Chord of the ball along axis `k` through `x`.
    fn chord(&self, x: &[f64], k: usize) -> (f64, f64) {
        let rest: f64 = x.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v * v).sum();
        let half = (self.radius * self.radius - rest).max(0.0).sqrt();
        (-half, half)
    }

    /// Grid maximization of `f` over `Ω` followed by one golden-section pass
    /// along `t` and each state axis.
    pub fn maximize(&self, f: impl Fn(f64, &[f64]) -> f64, per_axis: usize, tol: f64) -> Argmax {
        let mut best = Argmax { value: f64::NEG_INFINITY, t: 0.0, x: vec![0.0; self.dim] };
        for t in self.time_nodes(per_axis) {
            for x in self.state_nodes(per_axis) {
                let v = f(t, &x);
                if v > best.value {
                    best = Argmax { value: v, t, x };
                }
            }
        }
        if self.time_dependent {
            let x = best.x.clone();
            let (t, v) = golden_max(|s| f(s, &x), 0.0, 1.0, tol);
            if v > best.value {
                best.value = v;
                best.t = t;
            }
        }
        for k in 0..self.dim {
            let (lo, hi) = self.chord(&best.x, k);
            let mut x = best.x.clone();
            let t = best.t;
            let (s, v) = golden_max(
                |s| {
                    x[k] = s;
                    f(t, &x)
                },
                lo,
                hi,
                tol,
            );
            if v > best.value {
                best.value = v;
                best.x[k] = s;
            }
        }
        best
    }
}

/// Returns the smallest `r` such that `θ(s)/s ≥ 1` on every sample of a
/// log-spaced grid over `[1e-6, r_max]` lying in `[r, r_max]`, floored at
/// `1e-6`. The crossing between the last failing and first passing grid
/// sample is refined by bisection.
pub fn find_r0(problem: &ProblemSpec, r_max: f64, grid_n: usize) -> Result<f64> {
    const FLOOR: f64 = 1e-6;
    if !(r_max > 0.0) || grid_n < 2 {
        return Err(Error::Invalid("find_r0 needs r_max > 0 and at least two grid points".into()));
    }
    let passes = |r: f64| problem.theta(r) >= r;
    let ratio = problem.theta(r_max) / r_max;
    if ratio < 1.0 {
        return Err(Error::WeakGrowth { r_max, ratio });
    }
    let (lmin, lmax) = (FLOOR.ln(), r_max.ln());
    let grid: Vec<f64> = (0..grid_n)
        .map(|i| (lmin + (lmax - lmin) * i as f64 / (grid_n - 1) as f64).exp())
        .collect();
    let Some(fail) = (0..grid_n).rev().find(|&i| !passes(grid[i])) else {
        return Ok(FLOOR);
    };
    let (mut lo, mut hi) = (grid[fail], grid[(fail + 1).min(grid_n - 1)]);
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.max(FLOOR))
}

/// First half of the certificate: constants that depend only on the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaConstants {
    pub r0: f64,
    pub c: f64,
    pub r_omega: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

impl OmegaConstants {
    pub fn omega(&self, problem: &ProblemSpec) -> Omega {
        Omega::new(problem, self.r_omega)
    }
}

/// `c = r0 + ∫₀¹ L(t,0,0) dt` and the radius `c_g·c`.
pub fn budget(problem: &ProblemSpec, opts: &GridOptions) -> Result<(f64, f64, f64)> {
    let r0 = find_r0(problem, opts.r0_max, opts.r0_grid_n)?;
    let zx = vec![0.0; problem.dim_x()];
    let zu = vec![0.0; problem.dim_u()];
    let integral = simpson(|t| problem.cost(t, &zx, &zu), 0.0, 1.0, opts.quadrature_panels);
    if !integral.is_finite() {
        return Err(Error::Evaluation { what: "L(t,0,0)", t: f64::NAN, x: zx, u: zu });
    }
    let c = r0 + integral;
    Ok((r0, c, problem.constants.c_g * c))
}

/// Computes `r0`, `c`, `R_Ω`, `Λ₀ = max_Ω L(t,x,0)` and `Λ₁ = max_Ω |∇ᵤL(t,x,0)|`.
pub fn compute_constants(problem: &ProblemSpec, opts: &GridOptions) -> Result<OmegaConstants> {
    let (r0, c, r_omega) = budget(problem, opts)?;
    let omega = Omega::new(problem, r_omega);
    let per_axis = if problem.dim_x() == 1 { opts.omega_grid_n } else { opts.omega_grid_n_multi };
    let zu = vec![0.0; problem.dim_u()];
    let l0 = omega.maximize(|t, x| problem.cost(t, x, &zu), per_axis, opts.refine_tol);
    let l1 = omega.maximize(|t, x| problem.cost_gradient(t, x, &zu).du.norm(), per_axis, opts.refine_tol);
    for (what, m) in [("max L(t,x,0)", &l0), ("max |grad_u L(t,x,0)|", &l1)] {
        if !m.value.is_finite() {
            return Err(Error::Evaluation { what, t: m.t, x: m.x.clone(), u: zu.clone() });
        }
    }
    Ok(OmegaConstants { r0, c, r_omega, lambda0: l0.value, lambda1: l1.value })
}

/// The excess function `σ(r) = max_{Ω × {|u| ≤ r}} ⟨∇ᵤL, u⟩ − L`.
pub struct Sigma<'a> {
    problem: &'a ProblemSpec,
    omega: Omega,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    dirs: Vec<Vec<f64>>,
    shells: usize,
    r_max: f64,
    tol: f64,
}

impl<'a> Sigma<'a> {
    pub fn new(problem: &'a ProblemSpec, constants: &OmegaConstants, opts: &GridOptions) -> Self {
        let omega = constants.omega(problem);
        let per_axis = if problem.dim_x() == 1 { opts.sigma_grid_n } else { opts.omega_grid_n_multi };
        Self {
            problem,
            omega,
            times: omega.time_nodes(per_axis),
            states: omega.state_nodes(per_axis),
            dirs: directions(problem.dim_u(), opts.extra_directions, 0x5167),
            shells: opts.sigma_shells.max(1),
            r_max: opts.sigma_r_max,
            tol: opts.refine_tol,
        }
    }

    fn excess(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        let du = self.problem.cost_gradient(t, x, u).du;
        du.dot(&DVector::from_column_slice(u)) - self.problem.cost(t, x, u)
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        let scaled = |dir: &[f64], s: f64| dir.iter().map(|d| d * s).collect::<Vec<_>>();
        let mut best = (f64::NEG_INFINITY, 0.0, vec![0.0; self.omega.dim], 0usize, 0.0);
        for &t in &self.times {
            for x in &self.states {
                for k in 0..=self.shells {
                    let s = r * k as f64 / self.shells as f64;
                    for (di, dir) in self.dirs.iter().enumerate() {
                        let v = self.excess(t, x, &scaled(dir, s));
                        if v > best.0 {
                            best = (v, t, x.clone(), di, s);
                        }
                        if k == 0 {
                            break;
                        }
                    }
                }
            }
        }
        let (mut value, mut t, mut x, di, s) = best;
        let dir = &self.dirs[di];
        if self.omega.time_dependent {
            let (tt, v) = golden_max(|tt| self.excess(tt, &x, &scaled(dir, s)), 0.0, 1.0, self.tol);
            if v > value {
                value = v;
                t = tt;
            }
        }
        for k in 0..self.omega.dim {
            let (lo, hi) = self.omega.chord(&x, k);
            let mut xk = x.clone();
            let (a, v) = golden_max(
                |a| {
                    xk[k] = a;
                    self.excess(t, &xk, &scaled(dir, s))
                },
                lo,
                hi,
                self.tol,
            );
            if v > value {
                value = v;
                x[k] = a;
            }
        }
        let (_, v) = golden_max(|s| self.excess(t, &x, &scaled(dir, s)), 0.0, r, self.tol);
        value.max(v)
    }

    /// Smallest `r` with `σ(r) ≥ target`, by bisection to absolute tolerance `1e-8`.
    pub fn inverse(&self, target: f64) -> Result<f64> {
        let mut lo = 0.0;
        if self.eval(lo) >= target {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.eval(hi) < target {
            lo = hi;
            hi *= 2.0;
            if hi > self.r_max {
                return Err(Error::NoBracket { target, r_max: self.r_max });
            }
        }
        while hi - lo > 1e-8 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Picks the largest `T0` on `{0.99, 0.98, …, 0.01}` (or the fixed
/// `opts.t0`) with `σ((c+1)/T0) > δ/ξ + margin`. Returns `(T0, β)`.
pub fn choose_t0(problem: &ProblemSpec, constants: &OmegaConstants, opts: &GridOptions) -> Result<(f64, f64)> {
    let sigma = Sigma::new(problem, constants, opts);
    let threshold = problem.constants.delta / problem.constants.xi;
    let candidates: Vec<f64> = match opts.t0 {
        Some(t0) if t0 > 0.0 && t0 < 1.0 => vec![t0],
        Some(t0) => return Err(Error::Parameter { key: "t0".into(), reason: format!("must lie in (0,1), got {t0}") }),
        None => (1..=99).rev().map(|k| k as f64 / 100.0).collect(),
    };
    for t0 in candidates {
        let beta = sigma.eval((constants.c + 1.0) / t0);
        if beta > threshold + opts.t0_margin {
            return Ok((t0, beta));
        }
    }
    Err(Error::BetaUnattainable { threshold })
}

/// `sup_{r ≥ 0} r / (θ(r) + β)` on a log grid with a decreasing-tail test.
pub fn compute_eta(problem: &ProblemSpec, beta: f64, opts: &GridOptions) -> Result<f64> {
    let f = |r: f64| r / (problem.theta(r) + beta);
    let n = opts.eta_grid_n.max(10);
    let (lmin, lmax) = (-6.0_f64, opts.eta_r_max.log10());
    let mut grid = vec![0.0];
    grid.extend((0..n).map(|i| 10f64.powf(lmin + (lmax - lmin) * i as f64 / (n - 1) as f64)));
    let values: Vec<f64> = grid.iter().map(|&r| f(r)).collect();
    let (imax, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let lo = grid[imax.saturating_sub(1)];
    let hi = grid[(imax + 1).min(grid.len() - 1)];
    let (_, best) = golden_max(f, lo, hi, opts.refine_tol);
    let best = best.max(values[imax]);
    let last = values.len() - 1;
    let tail_ok = values[last] < best - 1e-12 && values[last] <= values[last - 1];
    if !best.is_finite() || !tail_ok {
        return Err(Error::EtaUnbounded { r_max: opts.eta_r_max });
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Autonomous bound.
    Theorem1,
    /// Bound for `g = g(t)`, through `η` and `γ`.
    Theorem2,
}

impl Theorem {
    pub fn for_structure(structure: Structure) -> Option<Self> {
        match structure {
            Structure::Autonomous => Some(Theorem::Theorem1),
            Structure::TimeVaryingGOnly => Some(Theorem::Theorem2),
            Structure::General => None,
        }
    }
}

/// Outcome of one sampled condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    /// Smallest observed `rhs − lhs`; negative means violated.
    pub min_margin: f64,
    /// `(t, x.., u.., v..)` at the smallest margin.
    pub worst_sample: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub samples: usize,
    pub u_cap: f64,
    pub seed: u64,
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingOptions {
    pub samples: usize,
    pub u_cap: f64,
    pub seed: u64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self { samples: 10_000, u_cap: 50.0, seed: 2024 }
    }
}

struct Tracker {
    name: &'static str,
    min_margin: f64,
    worst: Vec<f64>,
    passed: bool,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self { name, min_margin: f64::INFINITY, worst: Vec::new(), passed: true }
    }

    /// Records `margin = rhs − lhs`, accepting rounding-level violations
    /// relative to `scale`.
    fn record(&mut self, margin: f64, scale: f64, sample: &[f64]) {
        if !(margin >= -1e-9 * (1.0 + scale.abs())) {
            self.passed = false;
        }
        if margin < self.min_margin || margin.is_nan() {
            self.min_margin = margin;
            self.worst = sample.to_vec();
        }
    }

    fn finish(self) -> ConditionCheck {
        ConditionCheck { name: self.name.into(), passed: self.passed, min_margin: self.min_margin, worst_sample: self.worst }
    }
}

/// Norm bound for the rank-3 `∇_{(t,x)} g`: `sqrt(|g_t|² + Σ_k |∂g/∂x_k|²)`
/// with operator 2-norms, an upper bound on the induced norm.
pub fn input_gradient_norm(problem: &ProblemSpec, t: f64, x: &[f64]) -> f64 {
    let grad = problem.input_gradient(t, x);
    let mut acc = operator_norm(&grad.dt).powi(2);
    for gk in &grad.dx {
        acc += operator_norm(gk).powi(2);
    }
    acc.sqrt()
}

/// Samples `(C1)`–`(C4)` and the declared structure on `Ω × {|u| ≤ u_cap}`
/// with a seeded Halton sequence. Failures are data, not errors.
pub fn verify_conditions(problem: &ProblemSpec, r_omega: f64, opts: &SamplingOptions) -> ConditionReport {
    let (n, m) = (problem.dim_x(), problem.dim_u());
    let k = problem.constants;
    let mut seq = Halton::new(1 + n + 2 * m, opts.seed);
    let mut c1 = Tracker::new("C1");
    let mut c2 = Tracker::new("C2");
    let mut c3 = Tracker::new("C3");
    let mut c4 = Tracker::new("C4");
    let mut st = Tracker::new("structure");
    for i in 0..opts.samples {
        let p = seq.next_point();
        let t = p[0];
        let x = cube_to_ball(&p[1..1 + n], r_omega);
        let mut u = cube_to_ball(&p[1 + n..1 + n + m], opts.u_cap);
        let v = cube_to_ball(&p[1 + n + m..], opts.u_cap);
        if i == 0 {
            u.iter_mut().for_each(|a| *a = 0.0);
        }
        let sample: Vec<f64> = std::iter::once(t).chain(x.iter().copied()).chain(u.iter().copied()).chain(v.iter().copied()).collect();

        let l = problem.cost(t, &x, &u);
        let th = problem.theta(norm(&u));
        c1.record((l - th).min(th), l, &sample);

        let grad = problem.cost_gradient(t, &x, &u);
        let du: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a - b).collect();
        let lv = problem.cost(t, &x, &v);
        let lin = grad.du.dot(&DVector::from_column_slice(&du));
        let dn = norm(&du);
        c2.record(lv - (l + lin + 0.5 * k.mu * dn * dn), lv, &sample);

        let g = problem.input(t, &x);
        let gu = (&g * DVector::from_column_slice(&u)).norm();
        let grad_tx = (grad.dt * grad.dt + grad.dx.norm_squared()).sqrt();
        c3.record(k.xi * l + k.delta - grad_tx * gu, k.xi * l + k.delta, &sample);

        let gnorm = operator_norm(&g);
        let dgnorm = input_gradient_norm(problem, t, &x);
        c4.record((k.c_g - gnorm).min(k.c_grad_g - dgnorm), k.c_g.max(k.c_grad_g), &sample);

        let ig = problem.input_gradient(t, &x);
        let dev = match problem.structure {
            Structure::Autonomous => grad.dt.abs().max(operator_norm(&ig.dt)),
            Structure::TimeVaryingGOnly => ig.dx.iter().map(operator_norm).fold(0.0, f64::max),
            Structure::General => 0.0,
        };
        st.record(-dev, 0.0, &sample);
    }
    ConditionReport {
        samples: opts.samples,
        u_cap: opts.u_cap,
        seed: opts.seed,
        checks: vec![c1.finish(), c2.finish(), c3.finish(), c4.finish(), st.finish()],
    }
}

/// The finished certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub problem: String,
    pub structure: Structure,
    pub constants: Constants,
    pub r0: f64,
    pub c: f64,
    pub r_omega: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub t0: f64,
    pub beta: f64,
    pub eta: f64,
    pub gamma: Option<f64>,
    /// `(Λ₁ + √(Λ₁² + 4μΛ₀))/2`, shared by both theorems.
    pub ell_linear: f64,
    /// The square-root branch of the active theorem.
    pub ell_quadratic: f64,
    pub ell: f64,
    pub theorem_used: Theorem,
    pub grid: GridOptions,
    pub condition_report: Option<ConditionReport>,
}

impl Certificate {
    pub fn omega_constants(&self) -> OmegaConstants {
        OmegaConstants { r0: self.r0, c: self.c, r_omega: self.r_omega, lambda0: self.lambda0, lambda1: self.lambda1 }
    }

    pub fn conditions_hold(&self) -> bool {
        self.condition_report.as_ref().is_some_and(ConditionReport::all_passed)
    }
}

/// `(Λ₁ + √(Λ₁² + 4μΛ₀))/2`.
pub fn linear_branch(mu: f64, lambda0: f64, lambda1: f64) -> f64 {
    0.5 * (lambda1 + (lambda1 * lambda1 + 4.0 * mu * lambda0).sqrt())
}

/// `√((2/μ)(Λ₀+β))`, the autonomous square-root branch.
pub fn theorem1_branch(mu: f64, lambda0: f64, beta: f64) -> f64 {
    (2.0 / mu * (lambda0 + beta)).sqrt()
}

/// `((c_∇g + c_g ξ)/(c_g ξ)) · exp(c_g η ξ (Λ₀ + β))`.
pub fn gamma(k: &Constants, eta: f64, lambda0: f64, beta: f64) -> f64 {
    let cgx = k.c_g * k.xi;
    (k.c_grad_g + cgx) / cgx * (cgx * eta * (lambda0 + beta)).exp()
}

/// `√((2/μ)(Λ₀+β)(1+γξ))`, the time-varying square-root branch.
pub fn theorem2_branch(mu: f64, lambda0: f64, beta: f64, gamma: f64, xi: f64) -> f64 {
    (2.0 / mu * (lambda0 + beta) * (1.0 + gamma * xi)).sqrt()
}

/// Assembles `η`, `γ` and `ℓ` for the theorem matching the problem structure.
pub fn compute_bound(
    problem: &ProblemSpec,
    constants: &OmegaConstants,
    t0: f64,
    beta: f64,
    opts: &GridOptions,
) -> Result<Certificate> {
    let theorem = Theorem::for_structure(problem.structure).ok_or(Error::CertificateRefused)?;
    let k = problem.constants;
    let OmegaConstants { r0, c, r_omega, lambda0, lambda1 } = *constants;
    let eta = compute_eta(problem, beta, opts)?;
    let ell_linear = linear_branch(k.mu, lambda0, lambda1);
    let (gamma, ell_quadratic) = match theorem {
        Theorem::Theorem1 => (None, theorem1_branch(k.mu, lambda0, beta)),
        Theorem::Theorem2 => {
            if k.c_g * k.xi <= 0.0 {
                return Err(Error::Parameter { key: "c_g".into(), reason: "gamma needs c_g > 0".into() });
            }
            let gm = gamma(&k, eta, lambda0, beta);
            (Some(gm), theorem2_branch(k.mu, lambda0, beta, gm, k.xi))
        }
    };
    Ok(Certificate {
        problem: problem.name().to_string(),
        structure: problem.structure,
        constants: k,
        r0,
        c,
        r_omega,
        lambda0,
        lambda1,
        t0,
        beta,
        eta,
        gamma,
        ell_linear,
        ell_quadratic,
        ell: ell_quadratic.max(ell_linear),
        theorem_used: theorem,
        grid: opts.clone(),
        condition_report: None,
    })
}

/// Full pipeline: constants, sampled condition report, `T0`/`β`, bound.
pub fn certify(problem: &ProblemSpec, opts: &GridOptions, sampling: &SamplingOptions) -> Result<Certificate> {
    if problem.structure == Structure::General {
        return Err(Error::CertificateRefused);
    }
    let constants = compute_constants(problem, opts)?;
    let report = verify_conditions(problem, constants.r_omega, sampling);
    let (t0, beta) = choose_t0(problem, &constants, opts)?;
    let mut cert = compute_bound(problem, &constants, t0, beta, opts)?;
    cert.condition_report = Some(report);
    Ok(cert)
}

/// Worst margin of `L(t,x,u) − (−Λ₀ − Λ₁|u| + (μ/2)|u|²)` over sampled
/// points of `Ω × {|u| ≤ u_cap}`.
pub fn quadratic_minorant_margin(problem: &ProblemSpec, constants: &OmegaConstants, opts: &SamplingOptions) -> f64 {
    let (n, m) = (problem.dim_x(), problem.dim_u());
    let mu = problem.constants.mu;
    let mut seq = Halton::new(1 + n + m, opts.seed ^ 0x1e44a);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.samples {
        let p = seq.next_point();
        let x = cube_to_ball(&p[1..1 + n], constants.r_omega);
        let u = cube_to_ball(&p[1 + n..], opts.u_cap);
        let r = norm(&u);
        let lower = -constants.lambda0 - constants.lambda1 * r + 0.5 * mu * r * r;
        worst = worst.min(problem.cost(p[0], &x, &u) - lower);
    }
    worst
}
