//! Problem datum for the free-endpoint Lagrange problem
//!
//! ```text
//!   minimize ∫₀¹ L(t, x, u) dt   subject to   ẋ = g(t, x) u,   x(0) = 0
//! ```
//!
//! together with the declared growth and convexity constants, and a registry
//! of built-in problems with closed-form derivatives.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partial derivatives of the running cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub dt: f64,
    pub dx: DVector<f64>,
    pub du: DVector<f64>,
}

/// Partial derivatives of the input matrix `g`. `dx[k]` is `∂g/∂x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    pub dt: DMatrix<f64>,
    pub dx: Vec<DMatrix<f64>>,
}

pub type CostFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
pub type CostGradFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> CostGradient + Send + Sync>;
pub type InputFn = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;
pub type InputGradFn = Arc<dyn Fn(f64, &[f64]) -> InputGradient + Send + Sync>;
pub type ThetaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The callback half of a problem. All callbacks must be pure.
#[derive(Clone)]
pub struct Callbacks {
    pub cost: CostFn,
    pub cost_grad: CostGradFn,
    pub input: InputFn,
    pub input_grad: InputGradFn,
    pub theta: ThetaFn,
}

/// Declared constants: strong-convexity modulus `mu`, growth constants
/// `xi`/`delta`, and the bounds `c_g ≥ |g|`, `c_grad_g ≥ |∇g|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub mu: f64,
    pub xi: f64,
    pub delta: f64,
    pub c_g: f64,
    pub c_grad_g: f64,
}

impl Constants {
    pub const KEYS: [&'static str; 5] = ["mu", "xi", "delta", "c_g", "c_grad_g"];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        match key {
            "mu" => Some(&mut self.mu),
            "xi" => Some(&mut self.xi),
            "delta" => Some(&mut self.delta),
            "c_g" => Some(&mut self.c_g),
            "c_grad_g" => Some(&mut self.c_grad_g),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [("mu", self.mu), ("xi", self.xi), ("delta", self.delta)];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter {
                    key: key.into(),
                    reason: format!("must be a positive finite number, got {v}"),
                });
            }
        }
        for (key, v) in [("c_g", self.c_g), ("c_grad_g", self.c_grad_g)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter {
                    key: key.into(),
                    reason: format!("must be a nonnegative finite number, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Which explicit bound applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    /// `L = L(x, u)`, `g = g(x)`.
    Autonomous,
    /// `g = g(t)`; `L` may depend on all arguments.
    TimeVaryingGOnly,
    /// Neither; no bound is available.
    General,
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::Autonomous => "autonomous",
            Structure::TimeVaryingGOnly => "time-varying-g-only",
            Structure::General => "general",
        })
    }
}

/// Everything returned by [`ProblemSpec::evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub cost_density: f64,
    pub velocity: DVector<f64>,
    pub cost_gradient: CostGradient,
    pub input_gradient: InputGradient,
}

/// Immutable problem datum.
#[derive(Clone)]
pub struct ProblemSpec {
    name: String,
    dim_x: usize,
    dim_u: usize,
    callbacks: Callbacks,
    pub constants: Constants,
    pub structure: Structure,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim_x", &self.dim_x)
            .field("dim_u", &self.dim_u)
            .field("constants", &self.constants)
            .field("structure", &self.structure)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        dim_x: usize,
        dim_u: usize,
        callbacks: Callbacks,
        constants: Constants,
        structure: Structure,
    ) -> Result<Self> {
        if dim_x == 0 || dim_u == 0 {
            return Err(Error::Invalid("state and control dimensions must be positive".into()));
        }
        constants.validate()?;
        Ok(Self {
            name: name.into(),
            dim_x,
            dim_u,
            callbacks,
            constants,
            structure,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_u(&self) -> usize {
        self.dim_u
    }

    /// Returns a copy with the named constants replaced.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut out = self.clone();
        for (key, &value) in overrides {
            let slot = out.constants.slot(key).ok_or_else(|| Error::Parameter {
                key: key.clone(),
                reason: format!("unknown parameter; expected one of {}", Constants::KEYS.join(", ")),
            })?;
            *slot = value;
        }
        out.constants.validate()?;
        Ok(out)
    }

    #[inline]
    pub fn cost(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        (self.callbacks.cost)(t, x, u)
    }

    #[inline]
    pub fn cost_gradient(&self, t: f64, x: &[f64], u: &[f64]) -> CostGradient {
        (self.callbacks.cost_grad)(t, x, u)
    }

    #[inline]
    pub fn input(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        (self.callbacks.input)(t, x)
    }

    #[inline]
    pub fn input_gradient(&self, t: f64, x: &[f64]) -> InputGradient {
        (self.callbacks.input_grad)(t, x)
    }

    #[inline]
    pub fn theta(&self, r: f64) -> f64 {
        (self.callbacks.theta)(r)
    }

    /// `g(t, x) u`.
    pub fn velocity(&self, t: f64, x: &[f64], u: &[f64]) -> DVector<f64> {
        self.input(t, x) * DVector::from_column_slice(u)
    }

    /// `∇ₓ⟨g(t,x) u, v⟩`, i.e. the transpose of `∂(g u)/∂x` applied to `v`.
    pub fn velocity_jacobian_t(&self, t: f64, x: &[f64], u: &[f64], v: &DVector<f64>) -> DVector<f64> {
        let grad = self.input_gradient(t, x);
        let u = DVector::from_column_slice(u);
        DVector::from_iterator(self.dim_x, grad.dx.iter().map(|gk| (gk * &u).dot(v)))
    }

    fn check_dims(&self, x: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.dim_x {
            return Err(Error::Dimension { what: "state", expected: self.dim_x, got: x.len() });
        }
        if u.len() != self.dim_u {
            return Err(Error::Dimension { what: "control", expected: self.dim_u, got: u.len() });
        }
        Ok(())
    }

    /// Evaluates cost density, velocity and every partial derivative, with
    /// dimension and finiteness checks on all callback outputs.
    pub fn evaluate(&self, t: f64, x: &[f64], u: &[f64]) -> Result<Evaluation> {
        self.check_dims(x, u)?;
        let fail = |what: &'static str| Error::Evaluation { what, t, x: x.to_vec(), u: u.to_vec() };
        let cost_density = self.cost(t, x, u);
        if !cost_density.is_finite() {
            return Err(fail("L"));
        }
        let g = self.input(t, x);
        if g.shape() != (self.dim_x, self.dim_u) {
            return Err(Error::Dimension { what: "g rows", expected: self.dim_x, got: g.nrows() });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(fail("g"));
        }
        let velocity = &g * DVector::from_column_slice(u);
        let cost_gradient = self.cost_gradient(t, x, u);
        if cost_gradient.dx.len() != self.dim_x || cost_gradient.du.len() != self.dim_u {
            return Err(Error::Dimension {
                what: "grad_L",
                expected: self.dim_x + self.dim_u,
                got: cost_gradient.dx.len() + cost_gradient.du.len(),
            });
        }
        if !cost_gradient.dt.is_finite()
            || cost_gradient.dx.iter().chain(cost_gradient.du.iter()).any(|v| !v.is_finite())
        {
            return Err(fail("grad_L"));
        }
        let input_gradient = self.input_gradient(t, x);
        if input_gradient.dx.len() != self.dim_x {
            return Err(Error::Dimension { what: "grad_g", expected: self.dim_x, got: input_gradient.dx.len() });
        }
        if input_gradient
            .dx
            .iter()
            .chain(std::iter::once(&input_gradient.dt))
            .any(|m| m.shape() != (self.dim_x, self.dim_u) || m.iter().any(|v| !v.is_finite()))
        {
            return Err(fail("grad_g"));
        }
        Ok(Evaluation { cost_density, velocity, cost_gradient, input_gradient })
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["toy-quadratic", "lq-tracking", "sin-well", "lq-tv"];

fn scalar(v: f64) -> DVector<f64> {
    DVector::from_element(1, v)
}

fn constant_input(c: f64) -> (InputFn, InputGradFn) {
    (
        Arc::new(move |_, _| DMatrix::from_element(1, 1, c)),
        Arc::new(|_, _| InputGradient { dt: DMatrix::zeros(1, 1), dx: vec![DMatrix::zeros(1, 1)] }),
    )
}

/// `offset + ½u² + ½(x − 1)²`
fn tracking_cost(offset: f64) -> (CostFn, CostGradFn) {
    (
        Arc::new(move |_, x, u| offset + 0.5 * u[0] * u[0] + 0.5 * (x[0] - 1.0).powi(2)),
        Arc::new(|_, x, u| CostGradient { dt: 0.0, dx: scalar(x[0] - 1.0), du: scalar(u[0]) }),
    )
}

fn quadratic_theta(offset: f64) -> ThetaFn {
    Arc::new(move |r| offset + 0.5 * r * r)
}

/// Builds a registered problem and applies scalar constant overrides.
pub fn builtin(name: &str, overrides: &BTreeMap<String, f64>) -> Result<ProblemSpec> {
    let spec = match name {
        "toy-quadratic" => {
            let (input, input_grad) = constant_input(1.0);
            let callbacks = Callbacks {
                cost: Arc::new(|_, _, u| 1.0 + 0.5 * u[0] * u[0]),
                cost_grad: Arc::new(|_, _, u| CostGradient { dt: 0.0, dx: scalar(0.0), du: scalar(u[0]) }),
                input,
                input_grad,
                theta: quadratic_theta(1.0),
            };
            let constants = Constants { mu: 1.0, xi: 1.0, delta: 0.1, c_g: 1.0, c_grad_g: 0.0 };
            ProblemSpec::new(name, 1, 1, callbacks, constants, Structure::Autonomous)?
        }
        "lq-tracking" => {
            let (cost, cost_grad) = tracking_cost(0.1);
            let (input, input_grad) = constant_input(1.0);
            let callbacks = Callbacks { cost, cost_grad, input, input_grad, theta: quadratic_theta(0.1) };
            let constants = Constants { mu: 1.0, xi: 1.0, delta: 0.1, c_g: 1.0, c_grad_g: 0.0 };
            ProblemSpec::new(name, 1, 1, callbacks, constants, Structure::Autonomous)?
        }
        "sin-well" => {
            let (input, input_grad) = constant_input(1.0);
            let callbacks = Callbacks {
                cost: Arc::new(|_, x, u| 2.0 + 0.5 * u[0] * u[0] + x[0].sin()),
                cost_grad: Arc::new(|_, x, u| CostGradient { dt: 0.0, dx: scalar(x[0].cos()), du: scalar(u[0]) }),
                input,
                input_grad,
                theta: quadratic_theta(1.0),
            };
            let constants = Constants { mu: 1.0, xi: 1.0, delta: 0.1, c_g: 1.0, c_grad_g: 0.0 };
            ProblemSpec::new(name, 1, 1, callbacks, constants, Structure::Autonomous)?
        }
        "lq-tv" => {
            let (cost, cost_grad) = tracking_cost(0.1);
            let callbacks = Callbacks {
                cost,
                cost_grad,
                input: Arc::new(|t, _| DMatrix::from_element(1, 1, 1.0 + 0.5 * (2.0 * PI * t).sin())),
                input_grad: Arc::new(|t, _| InputGradient {
                    dt: DMatrix::from_element(1, 1, PI * (2.0 * PI * t).cos()),
                    dx: vec![DMatrix::zeros(1, 1)],
                }),
                theta: quadratic_theta(0.1),
            };
            let constants = Constants { mu: 1.0, xi: 2.0, delta: 0.5, c_g: 1.5, c_grad_g: PI };
            ProblemSpec::new(name, 1, 1, callbacks, constants, Structure::TimeVaryingGOnly)?
        }
        _ => {
            return Err(Error::UnknownProblem { name: name.into(), available: BUILTIN_NAMES.to_vec() });
        }
    };
    spec.with_overrides(overrides)
}
