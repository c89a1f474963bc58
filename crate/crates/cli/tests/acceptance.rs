//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lagbound_cli::pipeline::RunOutcome;
use lagbound_cli::{run_pipeline, RunConfig};
use lagbound_core::certificate::{compute_constants, quadratic_minorant_margin, Sigma};
use lagbound_core::numeric::{linspace, trapezoid_weights};
use lagbound_core::reparam::round_trip_error;
use lagbound_core::solver::{cost, cost_and_gradient};
use lagbound_core::{
    builtin, solve, GridOptions, ProblemSpec, SamplingOptions, Series, SolverOptions, Structure, BUILTIN_NAMES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

struct Verdict {
    passed: bool,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { passed: true, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.passed &= ok;
        self.notes.push(if ok { note } else { format!("FAILED {note}") });
    }
}

struct Fixture {
    name: &'static str,
    spec: ProblemSpec,
    outcome: RunOutcome,
    dir: TempDir,
}

fn problem(name: &str) -> ProblemSpec {
    builtin(name, &BTreeMap::new()).expect("built-in problem")
}

fn pipeline(name: &str, dir: &Path) -> RunOutcome {
    let mut cfg = RunConfig::new(name, dir);
    cfg.emit.probes = true;
    run_pipeline(&cfg)
}

fn fixtures() -> Vec<Fixture> {
    BUILTIN_NAMES
        .iter()
        .map(|&name| {
            let dir = tempfile::tempdir().expect("temporary directory");
            let outcome = pipeline(name, dir.path());
            Fixture { name, spec: problem(name), outcome, dir }
        })
        .collect()
}

fn lq_oracle() -> Verdict {
    let mut v = Verdict::new();
    let p = problem("lq-tracking");
    let start = Instant::now();
    let sol = solve(&p, &SolverOptions { steps: 1000, ..Default::default() });
    let elapsed = start.elapsed();
    let Ok(sol) = sol else {
        v.check(false, "solver error".into());
        return v;
    };
    let th = 1f64.tanh();
    let u0 = sol.u.node(0)[0];
    v.check(sol.converged, format!("converged in {} iterations", sol.iterations));
    v.check((u0 - th).abs() <= 1e-3, format!("u(0) = {u0:.6} (oracle {th:.6})"));
    v.check((sol.cost - (0.1 + 0.5 * th)).abs() <= 1e-4, format!("cost = {:.6} (oracle {:.6})", sol.cost, 0.1 + 0.5 * th));
    v.check(elapsed <= Duration::from_secs(10), format!("runtime {:.2?}", elapsed));
    v
}

fn theorem1_bounds(fx: &[Fixture]) -> Verdict {
    let mut v = Verdict::new();
    for f in fx.iter().filter(|f| f.spec.structure == Structure::Autonomous) {
        let (Some(cert), Some(sol)) = (&f.outcome.certificate, &f.outcome.solution) else {
            v.check(false, format!("{}: pipeline stopped early", f.name));
            continue;
        };
        let u = sol.max_abs_u();
        v.check(u <= cert.ell, format!("{}: max|u| = {u:.4} <= ell = {:.4}", f.name, cert.ell));
        if f.name == "lq-tracking" {
            v.check(
                (cert.ell - 4.97).abs() <= 0.05 * 4.97,
                format!("lq-tracking ell = {:.4} (4.97 +- 5%, L0 = {:.4}, beta = {:.4})", cert.ell, cert.lambda0, cert.beta),
            );
        }
    }
    v
}

fn theorem2_bounds(fx: &[Fixture]) -> Verdict {
    let mut v = Verdict::new();
    let f = fx.iter().find(|f| f.name == "lq-tv").expect("lq-tv fixture");
    let (Some(cert), Some(sol), Some(pmp)) = (&f.outcome.certificate, &f.outcome.solution, &f.outcome.pmp) else {
        v.check(false, "lq-tv: pipeline stopped early".into());
        return v;
    };
    let u = sol.max_abs_u();
    v.check(u <= cert.ell, format!("max|u| = {u:.4} <= ell = {:.4e} (eta = {:.4}, gamma = {:.4e})", cert.ell, cert.eta, cert.gamma.unwrap_or(f64::NAN)));
    match pmp.get("ratio-q-over-p") {
        Some(c) if c.vacuous => v.check(c.passed, "ratio |q|/|p| <= gamma: no node with q < 0 (vacuous)".into()),
        Some(c) => v.check(c.passed, format!("ratio |q|/|p| worst {:.4e} <= gamma {:.4e}", c.worst_value, c.limit)),
        None => v.check(false, "ratio check missing".into()),
    }
    v
}

fn gradient_check() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let steps = 100;
    let h = 1e-6;
    let w = trapezoid_weights(steps);
    for name in BUILTIN_NAMES {
        let p = problem(name);
        let mut worst = 0.0_f64;
        for _ in 0..20 {
            let mut u = Series::zeros(steps + 1, p.dim_u());
            u.data.iter_mut().for_each(|a| *a = rng.random_range(-2.0..2.0));
            let (_, g) = cost_and_gradient(&p, &u).expect("gradient");
            let (mut num, mut den) = (0.0_f64, 0.0_f64);
            for idx in 0..u.data.len() {
                let mut up = u.clone();
                up.data[idx] += h;
                let mut dn = u.clone();
                dn.data[idx] -= h;
                let fd = (cost(&p, &up).unwrap() - cost(&p, &dn).unwrap()) / (2.0 * h);
                num = num.max((g.data[idx] * w[idx / u.dim] - fd).abs());
                den = den.max(fd.abs());
            }
            worst = worst.max(num / den);
        }
        v.check(worst <= 1e-5, format!("{name}: worst relative error {worst:.2e} over 20 grids"));
    }
    v
}

fn equivalence(fx: &[Fixture]) -> Verdict {
    let mut v = Verdict::new();
    for f in fx {
        let (Some(cert), Some(sol), Some(rep)) = (&f.outcome.certificate, &f.outcome.solution, &f.outcome.summary.reparam) else {
            v.check(false, format!("{}: pipeline stopped early", f.name));
            continue;
        };
        v.check(
            sol.converged && rep.equivalence_error <= 1e-8,
            format!("{}: |T-(J+beta)|/T = {:.1e}", f.name, rep.equivalence_error),
        );
        let n = sol.steps();
        let errs: Vec<f64> = [n, 2 * n, 4 * n]
            .into_iter()
            .map(|m| round_trip_error(&f.spec, sol, cert.beta, m + 1).unwrap_or(f64::INFINITY))
            .collect();
        let exact = errs.iter().all(|e| *e == 0.0);
        let decreasing = errs[1] < errs[0] && errs[2] < errs[1];
        v.check(
            errs[2] <= 1e-4 && (decreasing || exact),
            format!(
                "{}: round trip {:.2e}, {:.2e}, {:.2e}{}",
                f.name,
                errs[0],
                errs[1],
                errs[2],
                if exact { " (exact)" } else { "" }
            ),
        );
    }
    v
}

fn lemma1() -> Verdict {
    let mut v = Verdict::new();
    let opts = GridOptions::default();
    for name in BUILTIN_NAMES {
        let p = problem(name);
        let Ok(k) = compute_constants(&p, &opts) else {
            v.check(false, format!("{name}: constants failed"));
            continue;
        };
        let margin = quadratic_minorant_margin(&p, &k, &SamplingOptions::default());
        v.check(margin >= -1e-9, format!("{name}: minorant margin {margin:.2e} on 10^4 samples"));
        let sigma = Sigma::new(&p, &k, &opts);
        let mu = p.constants.mu;
        let worst = linspace(0.0, 20.0, 100)
            .into_iter()
            .map(|r| sigma.eval(r) - (0.5 * mu * r * r - k.lambda0))
            .fold(f64::INFINITY, f64::min);
        v.check(worst >= -1e-9, format!("{name}: sigma(r) - (mu/2 r^2 - L0) >= {worst:.3e} on 100 r"));
    }
    v
}

fn budget_bounds(fx: &[Fixture]) -> Verdict {
    let mut v = Verdict::new();
    for f in fx {
        let (Some(cert), Some(sol)) = (&f.outcome.certificate, &f.outcome.solution) else {
            v.check(false, format!("{}: pipeline stopped early", f.name));
            continue;
        };
        let l1 = sol.l1_norm_u();
        let x = sol.max_abs_x();
        let cap = f.spec.constants.c_g * cert.c;
        v.check(l1 <= cert.c + 1e-6, format!("{}: int|u| = {l1:.4} <= c = {:.4}", f.name, cert.c));
        v.check(x <= cap + 1e-6, format!("{}: max|x| = {x:.4} <= c_g c = {cap:.4}", f.name));
    }
    v
}

fn adjoint(fx: &[Fixture]) -> Verdict {
    let mut v = Verdict::new();
    for f in fx {
        let Some(rep) = &f.outcome.pmp else {
            v.check(false, format!("{}: no adjoint report", f.name));
            continue;
        };
        let mut names = vec!["terminal-p", "hamiltonian-constant", "stationarity", "multiplier-size", "horizon"];
        if f.spec.structure == Structure::Autonomous {
            names.push("q-drift");
        }
        let mut failed = Vec::new();
        for n in &names {
            match rep.get(n) {
                Some(c) if c.passed && !(c.vacuous && *n == "q-drift") => {}
                _ => failed.push(*n),
            }
        }
        let terminal_exact = rep.get("terminal-p").is_some_and(|c| c.worst_value == 0.0);
        let stat = rep.get("stationarity").map_or(f64::NAN, |c| c.worst_value);
        let ham = rep.get("hamiltonian-constant").map_or(f64::NAN, |c| c.worst_value);
        v.check(
            failed.is_empty() && terminal_exact,
            format!(
                "{}: {} checks, stationarity {stat:.1e}, H deviation {ham:.1e}{}",
                f.name,
                names.len(),
                if failed.is_empty() { String::new() } else { format!(", failed {failed:?}") }
            ),
        );
    }
    v
}

fn inclusion(fx: &[Fixture]) -> Verdict {
    let mut v = Verdict::new();
    for f in fx {
        let Some(inc) = &f.outcome.summary.inclusion else {
            v.check(false, format!("{}: no inclusion probes", f.name));
            continue;
        };
        let l = &inc.lipschitz;
        let ok = inc.velocity_bounds_hold
            && inc.origin_in_all
            && l.pairs == 1000
            && l.worst_time_component_ratio <= 1.0 + 1e-6
            && l.worst_state_component_ratio <= 1.0 + 1e-6;
        v.check(
            ok,
            format!(
                "{}: {} probes bounded = {}, origin = {}, Lipschitz ratios {:.3e} / {:.3e} on {} pairs",
                f.name,
                inc.probes,
                inc.velocity_bounds_hold,
                inc.origin_in_all,
                l.worst_time_component_ratio,
                l.worst_state_component_ratio,
                l.pairs
            ),
        );
    }
    v
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok())
                .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default()
}

fn determinism(fx: &[Fixture]) -> Verdict {
    let mut v = Verdict::new();
    for f in fx {
        let again = tempfile::tempdir().expect("temporary directory");
        pipeline(f.name, again.path());
        let (a, b) = (files(f.dir.path()), files(again.path()));
        let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
        v.check(
            a.len() >= 7 && a.keys().eq(b.keys()) && differing.is_empty(),
            format!("{}: {} artifacts byte-identical{}", f.name, a.len(), if differing.is_empty() { String::new() } else { format!(", differ: {differing:?}") }),
        );
    }
    v
}

fn main() -> ExitCode {
    let fx = fixtures();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("LQ oracle", Box::new(lq_oracle)),
        ("bound validity, autonomous", Box::new(|| theorem1_bounds(&fx))),
        ("bound validity, time-varying", Box::new(|| theorem2_bounds(&fx))),
        ("gradient correctness", Box::new(gradient_check)),
        ("time-optimal equivalence", Box::new(|| equivalence(&fx))),
        ("quadratic minorant and sigma", Box::new(lemma1)),
        ("L1 and state budgets", Box::new(|| budget_bounds(&fx))),
        ("adjoint verification", Box::new(|| adjoint(&fx))),
        ("inclusion properties", Box::new(|| inclusion(&fx))),
        ("determinism", Box::new(|| determinism(&fx))),
    ];
    let mut all = true;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let verdict = run();
        all &= verdict.passed;
        println!(
            "criterion {:>2} {}: {} | {}",
            i + 1,
            title,
            if verdict.passed { "PASS" } else { "FAIL" },
            verdict.notes.join("; ")
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
