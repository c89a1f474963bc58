//! Stage orchestration: certificate, solve, time-optimal map, adjoint
//! checks and inclusion probes, with artifacts written along the way.
//!
//! Errors abort the run at the failing stage. Failed checks are recorded
//! and the run continues, so every artifact of the later stages is still
//! written; the exit code is that of the first stage that failed.

use std::fs;
use std::path::Path;

use lagbound_core::inclusion::{
    default_panel, lipschitz_probe, sample_pairs, support_function, velocity_bounds_hold, InclusionProbe,
    LipschitzReport,
};
use lagbound_core::numeric::directions;
use lagbound_core::solver::SolutionChecks;
use lagbound_core::{
    certify, integrate_adjoint, residual_report, solve, to_time_optimal, Certificate, ControlSolution, PmpReport,
    ProblemSpec, Theorem, TimeOptimalTrajectory,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, CertificateFile};
use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Conditions,
    Certificate,
    Solver,
    Reparam,
    Pmp,
    Inclusion,
    Bound,
    Io,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Conditions => 3,
            Stage::Certificate => 4,
            Stage::Solver => 5,
            Stage::Reparam => 6,
            Stage::Pmp => 7,
            Stage::Inclusion => 8,
            Stage::Bound => 9,
            Stage::Io => 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionSummary {
    pub probes: usize,
    pub velocity_bounds_hold: bool,
    pub origin_in_all: bool,
    pub lipschitz: LipschitzReport,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub passed: bool,
    pub exit_code: i32,
    pub failed_stage: Option<Stage>,
    pub diagnostics: Vec<Diagnostic>,
    pub theorem: Option<Theorem>,
    pub ell: Option<f64>,
    pub max_abs_u: Option<f64>,
    /// `max |û| ≤ ℓ`.
    pub bound_holds: Option<bool>,
    pub conditions_passed: Option<bool>,
    pub solution: Option<SolutionSummary>,
    pub reparam: Option<ReparamSummary>,
    pub pmp_passed: Option<bool>,
    pub inclusion: Option<InclusionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub steps: usize,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm_final: f64,
    pub checks: Option<SolutionChecks>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReparamSummary {
    pub nodes: usize,
    pub total_time: f64,
    /// `|T − (J + β)| / T`.
    pub equivalence_error: f64,
}

/// Relative tolerance of `T = J + β`.
pub const EQUIVALENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub certificate: Option<Certificate>,
    pub solution: Option<ControlSolution>,
    pub trajectory: Option<TimeOptimalTrajectory>,
    pub pmp: Option<PmpReport>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }
}

struct Run<'a> {
    cfg: &'a RunConfig,
    summary: Summary,
    summary_file: &'static str,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, summary_file: &'static str) -> Self {
        let summary = Summary { problem: cfg.problem.clone(), ..Default::default() };
        Self { cfg, summary, summary_file }
    }

    fn fail(&mut self, stage: Stage, message: impl Into<String>) {
        self.summary.diagnostics.push(Diagnostic { stage, message: message.into() });
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&Path) -> std::io::Result<()>) -> bool {
        let path = self.cfg.out_dir.join(name);
        match f(&path) {
            Ok(()) => true,
            Err(e) => {
                self.fail(Stage::Io, format!("{}: {e}", path.display()));
                false
            }
        }
    }

    fn finish(mut self, outcome: Partial) -> RunOutcome {
        let first = self.summary.diagnostics.iter().map(|d| d.stage).next();
        self.summary.failed_stage = first;
        self.summary.exit_code = first.map_or(0, Stage::exit_code);
        self.summary.passed = first.is_none();
        let summary = self.summary.clone();
        if !self.write(self.summary_file, |p| artifacts::write_json(p, &summary)) {
            self.summary.failed_stage.get_or_insert(Stage::Io);
            self.summary.exit_code = self.summary.failed_stage.map_or(0, Stage::exit_code);
            self.summary.passed = false;
        }
        RunOutcome {
            summary: self.summary,
            certificate: outcome.certificate,
            solution: outcome.solution,
            trajectory: outcome.trajectory,
            pmp: outcome.pmp,
        }
    }
}

#[derive(Default)]
struct Partial {
    certificate: Option<Certificate>,
    solution: Option<ControlSolution>,
    trajectory: Option<TimeOptimalTrajectory>,
    pmp: Option<PmpReport>,
}

fn start(cfg: &RunConfig) -> Result<(Run<'_>, ProblemSpec, Theorem), RunOutcome> {
    let mut run = Run::new(cfg, artifacts::SUMMARY);
    if let Err(e) = fs::create_dir_all(&cfg.out_dir) {
        run.fail(Stage::Io, format!("{}: {e}", cfg.out_dir.display()));
        return Err(run.finish(Partial::default()));
    }
    match cfg.resolve() {
        Ok((spec, theorem)) => Ok((run, spec, theorem)),
        Err(msg) => {
            run.fail(Stage::Config, msg);
            Err(run.finish(Partial::default()))
        }
    }
}

fn certificate_stage(run: &mut Run, spec: &ProblemSpec) -> Option<Certificate> {
    let cert = match certify(spec, &run.cfg.grid, &run.cfg.sampling) {
        Ok(c) => c,
        Err(e) => {
            run.fail(Stage::Certificate, e.to_string());
            return None;
        }
    };
    let conditions = cert.conditions_hold();
    run.summary.conditions_passed = Some(conditions);
    if !conditions {
        let failed: Vec<&str> = cert
            .condition_report
            .iter()
            .flat_map(|r| r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()))
            .collect();
        run.fail(Stage::Conditions, format!("sampled conditions failed: {}", failed.join(", ")));
    }
    run.summary.theorem = Some(cert.theorem_used);
    run.summary.ell = Some(cert.ell);
    let file = CertificateFile { overrides: run.cfg.overrides.clone(), certificate: cert.clone() };
    run.write(artifacts::CERTIFICATE, |p| artifacts::write_json(p, &file));
    Some(cert)
}

fn solver_stage(run: &mut Run, spec: &ProblemSpec) -> Option<ControlSolution> {
    let sol = match solve(spec, &run.cfg.solver) {
        Ok(s) => s,
        Err(e) => {
            run.fail(Stage::Solver, e.to_string());
            return None;
        }
    };
    if !sol.converged {
        run.fail(
            Stage::Solver,
            format!("not converged after {} iterations (gradient {:e})", sol.iterations, sol.grad_norm_final),
        );
    }
    run.summary.max_abs_u = Some(sol.max_abs_u());
    run.summary.solution = Some(SolutionSummary {
        steps: sol.steps(),
        cost: sol.cost,
        iterations: sol.iterations,
        converged: sol.converged,
        grad_norm_final: sol.grad_norm_final,
        checks: None,
    });
    if run.cfg.emit.trajectories {
        run.write(artifacts::SOLUTION, |p| artifacts::write_solution(p, &sol));
    }
    Some(sol)
}

fn bound_stage(run: &mut Run, sol: &ControlSolution, cert: &Certificate) {
    let checks = SolutionChecks::new(sol, cert);
    run.summary.bound_holds = Some(checks.bound_holds);
    if !checks.bound_holds {
        run.fail(Stage::Bound, format!("max |u| = {:e} exceeds ell = {:e}", checks.max_abs_u, checks.ell));
    }
    if !checks.l1_budget_holds {
        run.fail(Stage::Bound, format!("L1 norm {:e} exceeds c = {:e}", checks.l1_norm_u, checks.c));
    }
    if !checks.state_bound_holds {
        run.fail(Stage::Bound, format!("max |x| = {:e} exceeds {:e}", checks.max_abs_x, checks.state_radius));
    }
    if let Some(s) = run.summary.solution.as_mut() {
        s.checks = Some(checks);
    }
}

fn reparam_stage(run: &mut Run, spec: &ProblemSpec, sol: &ControlSolution, beta: f64) -> Option<TimeOptimalTrajectory> {
    let traj = match to_time_optimal(spec, sol, beta, run.cfg.time_optimal_nodes()) {
        Ok(t) => t,
        Err(e) => {
            run.fail(Stage::Reparam, e.to_string());
            return None;
        }
    };
    let err = (traj.total_time - (sol.cost + beta)).abs() / traj.total_time;
    if !(err <= EQUIVALENCE_TOL) {
        run.fail(Stage::Reparam, format!("|T - (J + beta)|/T = {err:e}"));
    }
    run.summary.reparam =
        Some(ReparamSummary { nodes: traj.nodes(), total_time: traj.total_time, equivalence_error: err });
    if run.cfg.emit.trajectories {
        run.write(artifacts::TIME_OPTIMAL, |p| artifacts::write_time_optimal(p, &traj));
    }
    Some(traj)
}

fn pmp_stage(
    run: &mut Run,
    spec: &ProblemSpec,
    cert: &Certificate,
    traj: &TimeOptimalTrajectory,
) -> Option<PmpReport> {
    let adj = match integrate_adjoint(spec, cert, traj) {
        Ok(a) => a,
        Err(e) => {
            run.fail(Stage::Pmp, e.to_string());
            return None;
        }
    };
    let report = residual_report(spec, cert, traj, &adj, &run.cfg.pmp);
    run.summary.pmp_passed = Some(report.all_passed());
    for c in report.checks.iter().filter(|c| !c.passed) {
        run.fail(
            Stage::Pmp,
            format!("{} failed at node {:?}: {:e} > {:e}", c.name, c.worst_node, c.worst_value, c.limit),
        );
    }
    run.write(artifacts::ADJOINT, |p| artifacts::write_adjoint(p, &adj));
    run.write(artifacts::PMP_REPORT, |p| artifacts::write_json(p, &report));
    Some(report)
}

/// Support-function probes at evenly spaced nodes of the time-optimal
/// trajectory, in every direction of a fixed set.
pub fn probe_trajectory(
    spec: &ProblemSpec,
    traj: &TimeOptimalTrajectory,
    cfg: &RunConfig,
) -> lagbound_core::Result<Vec<InclusionProbe>> {
    let n = spec.dim_x();
    let dirs = directions(n + 1, cfg.probes.extra_directions, cfg.sampling.seed);
    let count = cfg.probes.base_points.clamp(1, traj.nodes());
    let mut probes = Vec::with_capacity(count * dirs.len());
    for k in 0..count {
        let j = if count == 1 { 0 } else { k * (traj.nodes() - 1) / (count - 1) };
        for d in &dirs {
            probes.push(support_function(spec, traj.beta, traj.t[j], traj.y.node(j), d, &cfg.probes.support)?);
        }
    }
    Ok(probes)
}

fn inclusion_stage(run: &mut Run, spec: &ProblemSpec, cert: &Certificate, traj: &TimeOptimalTrajectory) {
    let probes = match probe_trajectory(spec, traj, run.cfg) {
        Ok(p) => p,
        Err(e) => {
            run.fail(Stage::Inclusion, e.to_string());
            return;
        }
    };
    let bounds = probes.iter().all(|p| velocity_bounds_hold(spec, cert.beta, p));
    let origin = probes.iter().all(|p| p.support_value >= 0.0);
    let opts = &run.cfg.probes;
    let pairs = sample_pairs(spec.dim_x(), cert.r_omega, opts.lipschitz_pairs, run.cfg.sampling.seed);
    let panel = default_panel(spec.dim_u(), cert.ell.max(1.0), opts.panel_size);
    let lipschitz = lipschitz_probe(spec, cert.beta, cert.eta, &pairs, &panel);
    if !bounds {
        run.fail(Stage::Inclusion, "velocity bounds violated at a probe");
    }
    if !origin {
        run.fail(Stage::Inclusion, "negative support value: origin outside G");
    }
    if !lipschitz.passed {
        run.fail(
            Stage::Inclusion,
            format!(
                "Lipschitz ratios {:e} (time), {:e} (state) exceed 1",
                lipschitz.worst_time_component_ratio, lipschitz.worst_state_component_ratio
            ),
        );
    }
    run.summary.inclusion = Some(InclusionSummary {
        probes: probes.len(),
        velocity_bounds_hold: bounds,
        origin_in_all: origin,
        lipschitz,
    });
    run.write(artifacts::PROBES, |p| artifacts::write_probes(p, &probes, spec.dim_x(), spec.dim_u()));
}

/// Runs every stage and writes the artifacts into `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> RunOutcome {
    let (mut run, spec, _) = match start(cfg) {
        Ok(v) => v,
        Err(outcome) => return outcome,
    };
    let mut out = Partial::default();
    let Some(cert) = certificate_stage(&mut run, &spec) else {
        return run.finish(out);
    };
    out.certificate = Some(cert.clone());
    let Some(sol) = solver_stage(&mut run, &spec) else {
        return run.finish(out);
    };
    if let Some(traj) = reparam_stage(&mut run, &spec, &sol, cert.beta) {
        if cfg.emit.adjoint {
            out.pmp = pmp_stage(&mut run, &spec, &cert, &traj);
        }
        if cfg.emit.probes {
            inclusion_stage(&mut run, &spec, &cert, &traj);
        }
        out.trajectory = Some(traj);
    }
    bound_stage(&mut run, &sol, &cert);
    out.solution = Some(sol);
    run.finish(out)
}

/// Certificate only.
pub fn run_certify(cfg: &RunConfig) -> RunOutcome {
    let (mut run, spec, _) = match start(cfg) {
        Ok(v) => v,
        Err(outcome) => return outcome,
    };
    let certificate = certificate_stage(&mut run, &spec);
    run.finish(Partial { certificate, ..Default::default() })
}

/// Solver only.
pub fn run_solve(cfg: &RunConfig) -> RunOutcome {
    let mut run = Run::new(cfg, artifacts::SUMMARY);
    if let Err(e) = fs::create_dir_all(&cfg.out_dir) {
        run.fail(Stage::Io, format!("{}: {e}", cfg.out_dir.display()));
        return run.finish(Partial::default());
    }
    let spec = match lagbound_core::builtin(&cfg.problem, &cfg.overrides) {
        Ok(s) => s,
        Err(e) => {
            run.fail(Stage::Config, e.to_string());
            return run.finish(Partial::default());
        }
    };
    let solution = solver_stage(&mut run, &spec);
    run.finish(Partial { solution, ..Default::default() })
}

/// Adjoint checks on the artifacts of an earlier run in `cfg.out_dir`.
/// The problem and its overrides come from `certificate.json`; the
/// solution from `solution.csv`.
pub fn run_verify(cfg: &RunConfig) -> RunOutcome {
    let mut run = Run::new(cfg, artifacts::VERIFY_SUMMARY);
    let dir = &cfg.out_dir;
    let file: CertificateFile = match fs::read_to_string(dir.join(artifacts::CERTIFICATE))
        .map_err(|e| e.to_string())
        .and_then(|s| serde_json::from_str(&s).map_err(|e| e.to_string()))
    {
        Ok(f) => f,
        Err(e) => {
            run.fail(Stage::Io, format!("{}: {e}", artifacts::CERTIFICATE));
            return run.finish(Partial::default());
        }
    };
    let cert = file.certificate;
    run.summary.problem = cert.problem.clone();
    run.summary.theorem = Some(cert.theorem_used);
    run.summary.ell = Some(cert.ell);
    let spec = match lagbound_core::builtin(&cert.problem, &file.overrides) {
        Ok(s) => s,
        Err(e) => {
            run.fail(Stage::Config, e.to_string());
            return run.finish(Partial::default());
        }
    };
    let (u, x) = match artifacts::read_solution(&dir.join(artifacts::SOLUTION)) {
        Ok(v) => v,
        Err(e) => {
            run.fail(Stage::Io, format!("{}: {e}", artifacts::SOLUTION));
            return run.finish(Partial::default());
        }
    };
    let sol = match rebuild_solution(&spec, u, x, cfg.solver.tol) {
        Ok(s) => s,
        Err(e) => {
            run.fail(Stage::Solver, e.to_string());
            return run.finish(Partial::default());
        }
    };
    run.summary.max_abs_u = Some(sol.max_abs_u());
    let mut out = Partial::default();
    if let Some(traj) = reparam_stage(&mut run, &spec, &sol, cert.beta) {
        out.pmp = pmp_stage(&mut run, &spec, &cert, &traj);
        out.trajectory = Some(traj);
    }
    bound_stage(&mut run, &sol, &cert);
    out.certificate = Some(cert);
    out.solution = Some(sol);
    run.finish(out)
}

/// A `ControlSolution` for stored nodes; cost and gradient are recomputed.
fn rebuild_solution(
    spec: &ProblemSpec,
    u: lagbound_core::Series,
    x: lagbound_core::Series,
    tol: f64,
) -> lagbound_core::Result<ControlSolution> {
    let steps = u.len() - 1;
    if u.dim != spec.dim_u() || x.dim != spec.dim_x() {
        return Err(lagbound_core::Error::Dimension {
            what: "solution.csv columns",
            expected: spec.dim_u() + spec.dim_x(),
            got: u.dim + x.dim,
        });
    }
    let (cost, grad) = lagbound_core::solver::cost_and_gradient(spec, &u)?;
    let gnorm = grad.data.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
    Ok(ControlSolution {
        grid: lagbound_core::solver::uniform_grid(steps),
        u,
        x,
        cost,
        grad_norm_final: gnorm,
        iterations: 0,
        converged: gnorm <= tol,
        cost_history: vec![cost],
    })
}
