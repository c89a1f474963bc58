//! Adjoint checks along solved built-ins.

use std::collections::BTreeMap;

use lagbound_core::pmp::{p44_residuals, PmpTolerances};
use lagbound_core::{
    builtin, certify, integrate_adjoint, residual_report, solve, to_time_optimal, Certificate, GridOptions,
    PmpReport, ProblemSpec, SamplingOptions, SolverOptions, Structure, BUILTIN_NAMES,
};

fn report(name: &str, tol: f64) -> (ProblemSpec, Certificate, PmpReport) {
    let p = builtin(name, &BTreeMap::new()).unwrap();
    let cert = certify(&p, &GridOptions::default(), &SamplingOptions::default()).unwrap();
    let sol = solve(&p, &SolverOptions { tol, ..Default::default() }).unwrap();
    assert!(sol.converged, "{name}");
    let traj = to_time_optimal(&p, &sol, cert.beta, sol.steps() + 1).unwrap();
    let adj = integrate_adjoint(&p, &cert, &traj).unwrap();
    let rep = residual_report(&p, &cert, &traj, &adj, &PmpTolerances::default());
    (p, cert, rep)
}

#[test]
fn every_check_passes_on_the_builtins() {
    for name in BUILTIN_NAMES {
        let (p, _, rep) = report(name, 1e-8);
        for c in &rep.checks {
            assert!(c.passed, "{name}: {c:?}");
        }
        assert_eq!(rep.get("terminal-p").unwrap().worst_value, 0.0);
        assert!(!rep.get("hamiltonian-positive").unwrap().vacuous);
        let drift = rep.get("q-drift").unwrap();
        assert_eq!(drift.vacuous, p.structure != Structure::Autonomous, "{name}");
    }
}

#[test]
fn lemma4_check_is_vacuous_when_q_stays_positive() {
    let (_, _, rep) = report("lq-tracking", 1e-8);
    let c = rep.get("lemma4-large-control").unwrap();
    assert!(c.passed && c.vacuous);
    let ratio = rep.get("ratio-q-over-p").unwrap();
    assert!(ratio.vacuous, "ratio check only runs for the time-varying bound");
}

/// Largest P44 residual away from the endpoints. Near `τ = 0` the residual
/// is dominated by the O(h) endpoint error of the discretized optimum, which
/// the solver tolerance does not affect.
fn interior_p44(name: &str, steps: usize, tol: f64) -> f64 {
    let p = builtin(name, &BTreeMap::new()).unwrap();
    let cert = certify(&p, &GridOptions::default(), &SamplingOptions::default()).unwrap();
    let sol = solve(&p, &SolverOptions { steps, tol, ..Default::default() }).unwrap();
    let traj = to_time_optimal(&p, &sol, cert.beta, steps + 1).unwrap();
    let adj = integrate_adjoint(&p, &cert, &traj).unwrap();
    let r = p44_residuals(&p, &traj, &adj);
    let skip = steps / 100;
    r[skip..=steps - skip].iter().copied().fold(0.0, f64::max)
}

#[test]
fn p44_residual_decreases_with_solver_tolerance() {
    for name in ["lq-tracking", "sin-well", "lq-tv"] {
        let loose = interior_p44(name, 4000, 1e-6);
        let tight = interior_p44(name, 4000, 1e-8);
        assert!(tight < loose, "{name}: {loose:e} -> {tight:e}");
    }
    assert_eq!(interior_p44("toy-quadratic", 1000, 1e-6), 0.0);
}

#[test]
fn horizon_is_within_certificate() {
    for name in BUILTIN_NAMES {
        let (_, cert, rep) = report(name, 1e-8);
        assert!(rep.total_time <= (cert.lambda0 + cert.beta) * (1.0 + 1e-12), "{name}");
    }
}
