//! The relaxed velocity set of the shifted time-optimal system,
//!
//! ```text
//!   G(t, y) = { ρ (1, g(t,y) w) / (L(t,y,w) + β) : w ∈ Rᵐ, ρ ∈ [0, 1] },
//! ```
//!
//! accessed through its support function, plus sampled checks of its
//! velocity bounds and Lipschitz estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cube_to_ball, directions, golden_max, norm, Halton};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionProbe {
    pub t: f64,
    pub y: Vec<f64>,
    pub direction: Vec<f64>,
    pub support_value: f64,
    pub argmax_rho: f64,
    pub argmax_w: Vec<f64>,
    /// `(v⁰, v)` at the maximizer.
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupportOptions {
    pub r_max: f64,
    /// Radial shells, spaced quadratically so they are dense near `w = 0`.
    pub shells: usize,
    pub extra_directions: usize,
    pub tol: f64,
}

impl Default for SupportOptions {
    fn default() -> Self {
        Self { r_max: 100.0, shells: 400, extra_directions: 32, tol: 1e-12 }
    }
}

/// `ρ (1, g(t,y) w) / (L(t,y,w) + β)`.
pub fn relaxed_velocity(p: &ProblemSpec, beta: f64, t: f64, y: &[f64], rho: f64, w: &[f64]) -> Vec<f64> {
    let scale = rho / (p.cost(t, y, w) + beta);
    let v = p.velocity(t, y, w);
    std::iter::once(scale).chain(v.iter().map(|a| a * scale)).collect()
}

/// `max ⟨d, v⟩` over `G(t, y)`. `ρ ∈ {0, 1}` suffices since the objective is
/// linear in `ρ`; `w` is searched on a radial–angular grid of `|w| ≤ r_max`
/// and refined by golden section along the best ray.
pub fn support_function(
    p: &ProblemSpec,
    beta: f64,
    t: f64,
    y: &[f64],
    direction: &[f64],
    opts: &SupportOptions,
) -> Result<InclusionProbe> {
    let (n, m) = (p.dim_x(), p.dim_u());
    if direction.len() != n + 1 {
        return Err(Error::Dimension { what: "direction", expected: n + 1, got: direction.len() });
    }
    if (norm(direction) - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid("support direction must be a unit vector".into()));
    }
    let objective = |w: &[f64]| {
        let v = relaxed_velocity(p, beta, t, y, 1.0, w);
        v.iter().zip(direction).map(|(a, b)| a * b).sum::<f64>()
    };
    let dirs = directions(m, opts.extra_directions, 0xD1EC);
    let along = |d: &[f64], s: f64| d.iter().map(|a| a * s).collect::<Vec<_>>();
    let radius = |k: usize| opts.r_max * (k as f64 / opts.shells as f64).powi(2);

    let mut best = (objective(&vec![0.0; m]), 0usize, 0usize);
    for k in 1..=opts.shells {
        for (di, d) in dirs.iter().enumerate() {
            let v = objective(&along(d, radius(k)));
            if v > best.0 {
                best = (v, di, k);
            }
        }
    }
    let (mut value, di, k) = best;
    let d = &dirs[di];
    let (lo, hi) = (radius(k.saturating_sub(1)), radius((k + 1).min(opts.shells)));
    let (s, v) = golden_max(|s| objective(&along(d, s)), lo, hi, opts.tol);
    let mut w = along(d, radius(k));
    if v > value {
        value = v;
        w = along(d, s);
    }
    let (rho, support) = if value > 0.0 { (1.0, value) } else { (0.0, 0.0) };
    if rho == 0.0 {
        w = vec![0.0; m];
    }
    Ok(InclusionProbe {
        t,
        y: y.to_vec(),
        direction: direction.to_vec(),
        support_value: support,
        argmax_rho: rho,
        velocity: relaxed_velocity(p, beta, t, y, rho, &w),
        argmax_w: w,
    })
}

/// Checks `|v⁰| ≤ 1/(θ(|w|)+β)` and `|v| ≤ c_g|w|/(θ(|w|)+β)` at the
/// probe's maximizer, with a relative rounding allowance.
pub fn velocity_bounds_hold(p: &ProblemSpec, beta: f64, probe: &InclusionProbe) -> bool {
    let r = norm(&probe.argmax_w);
    let denom = p.theta(r) + beta;
    let v0 = probe.velocity[0].abs();
    let v = norm(&probe.velocity[1..]);
    let b0 = 1.0 / denom;
    let b1 = p.constants.c_g * r / denom;
    v0 <= b0 * (1.0 + 1e-12) && v <= b1 * (1.0 + 1e-12) + 1e-300
}

/// A point `(t, y)` of `Ω`.
pub type BasePoint = (f64, Vec<f64>);

/// Quasi-random pairs of points of `[0,1] × radius·B`.
pub fn sample_pairs(dim_x: usize, radius: f64, count: usize, seed: u64) -> Vec<(BasePoint, BasePoint)> {
    let mut seq = Halton::new(2 + 2 * dim_x, seed);
    (0..count)
        .map(|_| {
            let q = seq.next_point();
            let a = (q[0], cube_to_ball(&q[2..2 + dim_x], radius));
            let b = (q[1], cube_to_ball(&q[2 + dim_x..], radius));
            (a, b)
        })
        .collect()
}

/// Panel of fixed `(ρ, w)`: `ρ ∈ {0.5, 1}` and controls in the ball `|w| ≤ w_max`.
pub fn default_panel(dim_u: usize, w_max: f64, count: usize) -> Vec<(f64, Vec<f64>)> {
    let controls: Vec<Vec<f64>> = if dim_u == 1 {
        (0..count)
            .map(|i| vec![-w_max + 2.0 * w_max * i as f64 / (count.max(2) - 1) as f64])
            .collect()
    } else {
        let mut seq = Halton::new(dim_u, 0x9A7E1);
        (0..count).map(|_| cube_to_ball(&seq.next_point(), w_max)).collect()
    };
    [0.5, 1.0]
        .into_iter()
        .flat_map(|rho| controls.iter().map(move |w| (rho, w.clone())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub pairs: usize,
    /// `ξ/β`.
    pub time_component_constant: f64,
    /// `c_∇g/β + η ξ c_g`.
    pub state_component_constant: f64,
    /// Largest `|v⁰₁ − v⁰₂| / (ξ/β · dist)`.
    pub worst_time_component_ratio: f64,
    /// Largest `|v₁ − v₂| / ((c_∇g/β + η ξ c_g) · dist)`.
    pub worst_state_component_ratio: f64,
    pub passed: bool,
}

fn ratio(diff: f64, bound: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if bound > 0.0 {
        diff / bound
    } else {
        f64::INFINITY
    }
}

/// Compares velocity differences at paired base points against the
/// Lipschitz constants, with `dist = |t₁ − t₂| + |y₁ − y₂|`.
pub fn lipschitz_probe(
    p: &ProblemSpec,
    beta: f64,
    eta: f64,
    pairs: &[(BasePoint, BasePoint)],
    panel: &[(f64, Vec<f64>)],
) -> LipschitzReport {
    let k = p.constants;
    let kt = k.xi / beta;
    let ks = k.c_grad_g / beta + eta * k.xi * k.c_g;
    let (mut worst_t, mut worst_s) = (0.0_f64, 0.0_f64);
    for ((t1, y1), (t2, y2)) in pairs {
        let dy: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a - b).collect();
        let dist = (t1 - t2).abs() + norm(&dy);
        for (rho, w) in panel {
            let v1 = relaxed_velocity(p, beta, *t1, y1, *rho, w);
            let v2 = relaxed_velocity(p, beta, *t2, y2, *rho, w);
            let d0 = (v1[0] - v2[0]).abs();
            let dv: Vec<f64> = v1[1..].iter().zip(&v2[1..]).map(|(a, b)| a - b).collect();
            worst_t = worst_t.max(ratio(d0, kt * dist));
            worst_s = worst_s.max(ratio(norm(&dv), ks * dist));
        }
    }
    LipschitzReport {
        pairs: pairs.len(),
        time_component_constant: kt,
        state_component_constant: ks,
        worst_time_component_ratio: worst_t,
        worst_state_component_ratio: worst_s,
        passed: worst_t <= 1.0 + 1e-6 && worst_s <= 1.0 + 1e-6,
    }
}
