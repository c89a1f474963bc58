//! Artifact files: JSON with fixed 17-significant-digit floats, and CSV
//! tables with one row per node.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use lagbound_core::inclusion::InclusionProbe;
use lagbound_core::solver::uniform_grid;
use lagbound_core::{AdjointPath, Certificate, ControlSolution, Series, TimeOptimalTrajectory};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

pub const CERTIFICATE: &str = "certificate.json";
pub const SOLUTION: &str = "solution.csv";
pub const TIME_OPTIMAL: &str = "timeoptimal.csv";
pub const ADJOINT: &str = "adjoint.csv";
pub const PMP_REPORT: &str = "pmp_report.json";
pub const SUMMARY: &str = "summary.json";
pub const PROBES: &str = "probes.csv";
pub const VERIFY_SUMMARY: &str = "verify_summary.json";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON formatter that writes every float as `fmt_f64` does.
struct SciFormatter(PrettyFormatter<'static>);

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = to_json(value).map_err(io::Error::other)?;
    fs::write(path, text)
}

/// `certificate.json`: the certificate plus the overrides that built the
/// problem, so that `verify` can reconstruct it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub overrides: BTreeMap<String, f64>,
    #[serde(flatten)]
    pub certificate: Certificate,
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |k| format!("{prefix}_{k}"))
}

fn write_table(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io::Error::other)?;
    w.write_record(&header).map_err(io::Error::other)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt_f64)).map_err(io::Error::other)?;
    }
    w.flush()
}

/// `t, u_1..u_m, x_1..x_n`.
pub fn write_solution(path: &Path, sol: &ControlSolution) -> io::Result<()> {
    let header = std::iter::once("t".to_string())
        .chain(numbered("u", sol.u.dim))
        .chain(numbered("x", sol.x.dim))
        .collect();
    let rows = sol.grid.iter().zip(sol.u.iter().zip(sol.x.iter())).map(|(&t, (u, x))| {
        std::iter::once(t).chain(u.iter().copied()).chain(x.iter().copied()).collect()
    });
    write_table(path, header, rows)
}

/// Control and state read back from `solution.csv`.
pub fn read_solution(path: &Path) -> io::Result<(Series, Series)> {
    let mut r = csv::Reader::from_path(path).map_err(io::Error::other)?;
    let header = r.headers().map_err(io::Error::other)?.clone();
    let m = header.iter().filter(|h| h.starts_with("u_")).count();
    let n = header.iter().filter(|h| h.starts_with("x_")).count();
    if header.len() != 1 + m + n || m == 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "solution.csv: unexpected header"));
    }
    let (mut grid, mut u, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(io::Error::other)?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("solution.csv: {e}")))?;
        grid.push(vals[0]);
        u.extend_from_slice(&vals[1..1 + m]);
        x.extend_from_slice(&vals[1 + m..]);
    }
    if grid.len() < 3 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "solution.csv: too few rows"));
    }
    let expected = uniform_grid(grid.len() - 1);
    if grid.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "solution.csv: grid is not uniform on [0,1]"));
    }
    Ok((Series { dim: m, data: u }, Series { dim: n, data: x }))
}

/// `tau, t, y_1..y_n, w_1..w_m`.
pub fn write_time_optimal(path: &Path, traj: &TimeOptimalTrajectory) -> io::Result<()> {
    let header = ["tau", "t"]
        .into_iter()
        .map(String::from)
        .chain(numbered("y", traj.y.dim))
        .chain(numbered("w", traj.w.dim))
        .collect();
    let rows = (0..traj.nodes()).map(|j| {
        [traj.tau[j], traj.t[j]]
            .into_iter()
            .chain(traj.y.node(j).iter().copied())
            .chain(traj.w.node(j).iter().copied())
            .collect()
    });
    write_table(path, header, rows)
}

/// `tau, q, p_1..p_n, H, stat_residual`.
pub fn write_adjoint(path: &Path, adj: &AdjointPath) -> io::Result<()> {
    let header = ["tau", "q"]
        .into_iter()
        .map(String::from)
        .chain(numbered("p", adj.p.dim))
        .chain(["H", "stat_residual"].into_iter().map(String::from))
        .collect();
    let rows = (0..adj.tau.len()).map(|j| {
        [adj.tau[j], adj.q[j]]
            .into_iter()
            .chain(adj.p.node(j).iter().copied())
            .chain([adj.hamiltonian[j], adj.stationarity[j]])
            .collect()
    });
    write_table(path, header, rows)
}

/// `t, y_1..y_n, d_0..d_n, support, rho, w_1..w_m`.
pub fn write_probes(path: &Path, probes: &[InclusionProbe], dim_x: usize, dim_u: usize) -> io::Result<()> {
    let header = std::iter::once("t".to_string())
        .chain(numbered("y", dim_x))
        .chain((0..=dim_x).map(|k| format!("d_{k}")))
        .chain(["support", "rho"].into_iter().map(String::from))
        .chain(numbered("w", dim_u))
        .collect();
    let rows = probes.iter().map(|p| {
        std::iter::once(p.t)
            .chain(p.y.iter().copied())
            .chain(p.direction.iter().copied())
            .chain([p.support_value, p.argmax_rho])
            .chain(p.argmax_w.iter().copied())
            .collect()
    });
    write_table(path, header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let v: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn json_floats_use_fixed_digits() {
        let text = to_json(&serde_json::json!({ "a": 0.5, "b": [1.0, 3], "c": null })).unwrap();
        assert!(text.contains("\"a\": 5.0000000000000000e-1"), "{text}");
        assert!(text.contains("1.0000000000000000e0"));
        assert!(text.contains("    3\n"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"], 0.5);
    }
}
