//! End-to-end runs of the `lagbound` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lagbound_cli::artifacts::{CertificateFile, ADJOINT, CERTIFICATE, PMP_REPORT, SOLUTION, SUMMARY, TIME_OPTIMAL};
use lagbound_cli::Summary;

fn lagbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagbound")).args(args).output().expect("binary runs")
}

fn summary(dir: &Path, file: &str) -> Summary {
    serde_json::from_str(&fs::read_to_string(dir.join(file)).unwrap()).unwrap()
}

fn out(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn lq_tracking_run_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagbound(&["run", "--problem", "lq-tracking", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [CERTIFICATE, SOLUTION, TIME_OPTIMAL, ADJOINT, PMP_REPORT, SUMMARY] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let s = summary(dir.path(), SUMMARY);
    assert!(s.passed && s.bound_holds == Some(true));
    assert!((s.max_abs_u.unwrap() - 0.7616).abs() < 1e-3);
    assert!((s.ell.unwrap() - 4.97).abs() < 0.05 * 4.97);
    let header = fs::read_to_string(dir.path().join(SOLUTION)).unwrap();
    assert!(header.starts_with("t,u_1,x_1\n"));
}

#[test]
fn toy_with_half_t0_gives_ell_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagbound(&["run", "--problem", "toy-quadratic", "--t0", "0.5", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(dir.path(), SUMMARY);
    assert!((s.ell.unwrap() - 4.0).abs() < 1e-5, "{:?}", s.ell);
    assert_eq!(s.max_abs_u, Some(0.0));
}

#[test]
fn forced_theorem_must_match_structure() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagbound(&["run", "--problem", "lq-tracking", "--theorem", "force-2", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let s = summary(dir.path(), SUMMARY);
    assert_eq!(s.exit_code, 2);
    assert!(!s.diagnostics.is_empty());
    assert!(!dir.path().join(CERTIFICATE).exists());

    let o = lagbound(&["certify", "--problem", "lq-tv", "--theorem", "force-1", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_problem_and_bad_override_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lagbound(&["run", "--problem", "nope", "--out", out(dir.path())]).status.code(), Some(2));
    assert_eq!(lagbound(&["run", "--problem", "lq-tracking", "--set", "mu"]).status.code(), Some(2));
    let o = lagbound(&["certify", "--problem", "lq-tracking", "--set", "no_such_key=1", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_conditions_exit_with_their_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagbound(&["certify", "--problem", "lq-tracking", "--set", "mu=3", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join(CERTIFICATE).is_file());
}

#[test]
fn unreachable_tolerance_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagbound(&["solve", "--problem", "sin-well", "--max-iter", "2", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(5));
    let s = summary(dir.path(), SUMMARY);
    assert!(!s.solution.unwrap().converged);
}

#[test]
fn verify_reuses_prior_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagbound(&["run", "--problem", "lq-tv", "--set", "xi=2.5", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cert: CertificateFile =
        serde_json::from_str(&fs::read_to_string(dir.path().join(CERTIFICATE)).unwrap()).unwrap();
    assert_eq!(cert.overrides["xi"], 2.5);
    assert_eq!(cert.certificate.constants.xi, 2.5);
    let report = fs::read(dir.path().join(PMP_REPORT)).unwrap();

    let o = lagbound(&["verify", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "verify_summary.json");
    assert!(s.passed && s.pmp_passed == Some(true));
    // the stored solution round-trips through 17-digit CSV exactly
    assert_eq!(fs::read(dir.path().join(PMP_REPORT)).unwrap(), report);
}

#[test]
fn verify_without_artifacts_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lagbound(&["verify", "--out", out(dir.path())]).status.code(), Some(10));
}

#[test]
fn config_file_is_applied_and_flags_take_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[problem]\nname = \"sin-well\"\n[problem.overrides]\ndelta = 0.2\n[solver]\nsteps = 300\n",
    )
    .unwrap();
    let o = lagbound(&["certify", "--config", cfg.to_str().unwrap(), "--solver-n", "200", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cert: CertificateFile =
        serde_json::from_str(&fs::read_to_string(dir.path().join(CERTIFICATE)).unwrap()).unwrap();
    assert_eq!(cert.certificate.problem, "sin-well");
    assert_eq!(cert.certificate.constants.delta, 0.2);
}

#[test]
fn probes_are_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagbound(&["run", "--problem", "sin-well", "--probes", "--out", out(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("probes.csv")).unwrap();
    assert!(text.starts_with("t,y_1,d_0,d_1,support,rho,w_1\n"));
    let s = summary(dir.path(), SUMMARY);
    assert!(s.inclusion.unwrap().lipschitz.passed);
}
