use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lagbound_cli::config::{parse_assignment, ConfigFile};
use lagbound_cli::{run_certify, run_pipeline, run_solve, run_verify, RunConfig, RunOutcome, Stage, TheoremSelector};
use lagbound_core::Theorem;

/// Explicit a-priori bounds on optimal controls: certify, solve, verify.
#[derive(Debug, Parser)]
#[command(name = "lagbound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full pipeline: certificate, solve, reparameterize, adjoint checks.
    Run(RunArgs),
    /// Certificate only.
    Certify(RunArgs),
    /// Solver only.
    Solve(RunArgs),
    /// Adjoint checks on the artifacts of an earlier run in `--out`.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Built-in problem name.
    #[arg(long)]
    problem: Option<String>,

    /// Override a problem parameter or constant (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, f64)>,

    /// TOML configuration file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Resolution of the certificate grids (r0 scan, quadrature panels,
    /// time axis of the sup searches).
    #[arg(long)]
    grid_n: Option<usize>,

    /// Solver time steps.
    #[arg(long)]
    solver_n: Option<usize>,

    /// Solver tolerance on the max-norm of the gradient.
    #[arg(long)]
    tol: Option<f64>,

    /// Solver iteration cap
    #[arg(long)]
    max_iter: Option<usize>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// auto, force-1 or force-2.
    #[arg(long)]
    theorem: Option<TheoremSelector>,

    /// Fix T0 instead of scanning the grid.
    #[arg(long)]
    t0: Option<f64>,

    /// Seed of the quasi-random sampling.
    #[arg(long)]
    seed: Option<u64>,

    /// Run the inclusion probes and write probes.csv.
    #[arg(long)]
    probes: bool,

    /// Skip solution.csv and timeoptimal.csv.
    #[arg(long)]
    no_trajectories: bool,

    /// Skip the adjoint stage.
    #[arg(long)]
    no_adjoint: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Directory holding certificate.json and solution.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Tolerance used to report solver convergence of the stored solution.
    #[arg(long)]
    tol: Option<f64>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::new(String::new(), self.out.clone());
        if let Some(path) = &self.config {
            ConfigFile::load(path)?.apply(&mut cfg);
        }
        if let Some(p) = self.problem {
            cfg.problem = p;
        }
        if cfg.problem.is_empty() {
            return Err(format!(
                "no problem given (use --problem or a config file); available: {}",
                lagbound_core::BUILTIN_NAMES.join(", ")
            ));
        }
        cfg.overrides.extend(self.set);
        if let Some(n) = self.grid_n {
            cfg.grid.r0_grid_n = n;
            cfg.grid.quadrature_panels = n;
            cfg.grid.omega_grid_n = n;
        }
        if let Some(n) = self.solver_n {
            cfg.solver.steps = n;
        }
        if let Some(t) = self.tol {
            cfg.solver.tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.solver.max_iter = m;
        }
        if let Some(t) = self.theorem {
            cfg.theorem = t;
        }
        if self.t0.is_some() {
            cfg.grid.t0 = self.t0;
        }
        if let Some(s) = self.seed {
            cfg.sampling.seed = s;
        }
        cfg.emit.probes |= self.probes;
        cfg.emit.trajectories &= !self.no_trajectories;
        cfg.emit.adjoint &= !self.no_adjoint;
        Ok(cfg)
    }
}

fn report(outcome: &RunOutcome) -> ExitCode {
    let s = &outcome.summary;
    if let Some(ell) = s.ell {
        let theorem = match s.theorem {
            Some(Theorem::Theorem1) => "autonomous bound",
            Some(Theorem::Theorem2) => "time-varying bound",
            None => "no bound",
        };
        println!("problem {}: ell = {ell:.6e} ({theorem})", s.problem);
    }
    if let Some(sol) = &s.solution {
        println!(
            "solver: cost = {:.10e}, iterations = {}, converged = {}",
            sol.cost, sol.iterations, sol.converged
        );
    }
    if let Some(u) = s.max_abs_u {
        println!("max |u| = {u:.6e}");
    }
    if let Some(b) = s.bound_holds {
        println!("bound holds: {b}");
    }
    for d in &s.diagnostics {
        eprintln!("error [{:?}]: {}", d.stage, d.message);
    }
    println!("{}", if s.passed { "PASS" } else { "FAIL" });
    ExitCode::from(s.exit_code as u8)
}

fn with_config(args: RunArgs, stage: fn(&RunConfig) -> RunOutcome) -> ExitCode {
    match args.into_config() {
        Ok(cfg) => report(&stage(&cfg)),
        Err(msg) => {
            eprintln!("error [Config]: {msg}");
            ExitCode::from(Stage::Config.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => with_config(args, run_pipeline),
        Command::Certify(args) => with_config(args, run_certify),
        Command::Solve(args) => with_config(args, run_solve),
        Command::Verify(args) => {
            let mut cfg = RunConfig::new(String::new(), args.out);
            if let Some(t) = args.tol {
                cfg.solver.tol = t;
            }
            report(&run_verify(&cfg))
        }
    }
}
