//! Small numerical kernels shared by the modules: quadrature, 1-D search,
//! interpolation on monotone grids, and a Halton low-discrepancy sequence.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` on `[a, b]` by golden-section search. Returns `(argmax, max)`.
///
/// The endpoints are compared against the interior result, so a monotone
/// objective still returns the correct boundary maximizer.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (fa, fb) = (f(a), f(b));
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while (hi - lo).abs() > tol && iter < 200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
        iter += 1;
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if fa > best.1 {
        best = (a, fa);
    }
    if fb > best.1 {
        best = (b, fb);
    }
    best
}

/// Composite Simpson rule with `panels` subintervals (rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Trapezoid weights for a uniform grid with `steps` intervals on `[0, 1]`.
pub fn trapezoid_weights(steps: usize) -> Vec<f64> {
    let h = 1.0 / steps as f64;
    (0..=steps)
        .map(|i| if i == 0 || i == steps { 0.5 * h } else { h })
        .collect()
}

/// Locates `x` in the increasing sequence `xs` and returns `(i, s)` with
/// `x ≈ xs[i] + s (xs[i+1] - xs[i])`, `s ∈ [0, 1]`. Values outside the range
/// are clamped to the end segments.
pub fn locate(xs: &[f64], x: f64) -> (usize, f64) {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return (0, 0.0);
    }
    if x >= xs[last] {
        return (last - 1, 1.0);
    }
    let i = xs.partition_point(|&v| v <= x).saturating_sub(1).min(last - 1);
    let span = xs[i + 1] - xs[i];
    let s = if span > 0.0 { (x - xs[i]) / span } else { 0.0 };
    (i, s.clamp(0.0, 1.0))
}

/// Euclidean norm of a slice.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Operator 2-norm (largest singular value).
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton points in `[0,1)^dim` with a seeded Cranley–Patterson rotation.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension {dim} exceeds {}", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        // skip the origin-heavy prefix
        Self { shift, index: 20 }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.index += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| (radical_inverse(self.index, p) + s).fract())
            .collect()
    }
}

/// Maps a unit-cube coordinate block to the closed ball of `radius`:
/// affine map to the cube `[-radius, radius]^d`, then radial projection of
/// points that fall outside the ball onto its boundary.
pub fn cube_to_ball(unit: &[f64], radius: f64) -> Vec<f64> {
    let mut v: Vec<f64> = unit.iter().map(|s| radius * (2.0 * s - 1.0)).collect();
    let r = norm(&v);
    if r > radius && r > 0.0 {
        v.iter_mut().for_each(|a| *a *= radius / r);
    }
    v
}

/// Deterministic set of unit directions in `R^dim`: the signed coordinate
/// axes followed by `extra` quasi-random directions.
pub fn directions(dim: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * dim + extra);
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[k] = sign;
            out.push(e);
        }
    }
    if dim > 1 {
        let mut seq = Halton::new(dim, seed);
        while out.len() < 2 * dim + extra {
            let p = cube_to_ball(&seq.next_point(), 1.0);
            let r = norm(&p);
            if r > 1e-3 {
                out.push(p.iter().map(|a| a / r).collect());
            }
        }
    }
    out
}

/// Grid of `n` evenly spaced points on `[a, b]` (a single midpoint when `n == 1`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Per-node vectors of fixed dimension stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Series {
    pub fn zeros(nodes: usize, dim: usize) -> Self {
        Self { dim, data: vec![0.0; nodes * dim] }
    }

    pub fn from_nodes<'a>(dim: usize, nodes: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut data = Vec::new();
        for n in nodes {
            debug_assert_eq!(n.len(), dim);
            data.extend_from_slice(n);
        }
        Self { dim, data }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// `(1 − s)·node(i) + s·node(i+1)`.
    pub fn lerp(&self, i: usize, s: f64) -> Vec<f64> {
        if s == 0.0 {
            return self.node(i).to_vec();
        }
        self.node(i).iter().zip(self.node(i + 1)).map(|(a, b)| a + s * (b - a)).collect()
    }

    /// Linear interpolation at abscissa `x` over the increasing nodes `xs`.
    pub fn sample(&self, xs: &[f64], x: f64) -> Vec<f64> {
        let (i, s) = locate(xs, x);
        self.lerp(i, s)
    }

    /// Largest Euclidean norm over nodes.
    pub fn max_norm(&self) -> f64 {
        self.iter().map(norm).fold(0.0, f64::max)
    }
}
