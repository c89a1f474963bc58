//! Run configuration, optionally loaded from a TOML file:
//!
//! ```toml
//! theorem = "auto"
//!
//! [problem]
//! name = "lq-tracking"
//!
//! [problem.overrides]
//! mu = 1.0
//!
//! [solver]
//! steps = 1000
//!
//! [grid]
//! omega_grid_n = 401
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lagbound_core::inclusion::SupportOptions;
use lagbound_core::pmp::PmpTolerances;
use lagbound_core::{GridOptions, ProblemSpec, SamplingOptions, SolverOptions, Structure, Theorem};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremSelector {
    #[default]
    Auto,
    #[serde(rename = "force-1")]
    Force1,
    #[serde(rename = "force-2")]
    Force2,
}

impl TheoremSelector {
    /// The theorem to certify with, or `None` if the selector contradicts
    /// the problem structure.
    pub fn resolve(self, structure: Structure) -> Option<Theorem> {
        let natural = Theorem::for_structure(structure);
        match self {
            TheoremSelector::Auto => natural,
            TheoremSelector::Force1 => natural.filter(|t| *t == Theorem::Theorem1),
            TheoremSelector::Force2 => natural.filter(|t| *t == Theorem::Theorem2),
        }
    }
}

impl FromStr for TheoremSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "force-1" => Ok(Self::Force1),
            "force-2" => Ok(Self::Force2),
            other => Err(format!("unknown theorem selector `{other}` (expected auto, force-1 or force-2)")),
        }
    }
}

impl fmt::Display for TheoremSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Force1 => "force-1",
            Self::Force2 => "force-2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitFlags {
    pub trajectories: bool,
    pub adjoint: bool,
    pub probes: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self { trajectories: true, adjoint: true, probes: false }
    }
}

/// Settings of the inclusion stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeOptions {
    /// Trajectory nodes used as base points of support-function probes.
    pub base_points: usize,
    /// Quasi-random directions added to the signed axes of `R^{n+1}`.
    pub extra_directions: usize,
    pub lipschitz_pairs: usize,
    /// Controls per `ρ` in the Lipschitz panel.
    pub panel_size: usize,
    pub support: SupportOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            base_points: 17,
            extra_directions: 8,
            lipschitz_pairs: 1000,
            panel_size: 21,
            support: SupportOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: String,
    pub overrides: BTreeMap<String, f64>,
    pub solver: SolverOptions,
    pub grid: GridOptions,
    pub sampling: SamplingOptions,
    pub pmp: PmpTolerances,
    pub probes: ProbeOptions,
    pub theorem: TheoremSelector,
    /// Nodes of the time-optimal grid; `None` uses one per solver node.
    pub time_optimal_nodes: Option<usize>,
    pub out_dir: PathBuf,
    pub emit: EmitFlags,
}

impl RunConfig {
    pub fn new(problem: impl Into<String>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            problem: problem.into(),
            overrides: BTreeMap::new(),
            solver: SolverOptions::default(),
            grid: GridOptions::default(),
            sampling: SamplingOptions::default(),
            pmp: PmpTolerances::default(),
            probes: ProbeOptions::default(),
            theorem: TheoremSelector::Auto,
            time_optimal_nodes: None,
            out_dir: out_dir.into(),
            emit: EmitFlags::default(),
        }
    }

    pub fn time_optimal_nodes(&self) -> usize {
        self.time_optimal_nodes.unwrap_or(self.solver.steps + 1)
    }

    /// Builds the problem and resolves the theorem selector.
    pub fn resolve(&self) -> Result<(ProblemSpec, Theorem), String> {
        let spec = lagbound_core::builtin(&self.problem, &self.overrides).map_err(|e| e.to_string())?;
        let theorem = self.theorem.resolve(spec.structure).ok_or_else(|| {
            format!(
                "theorem selector `{}` does not apply to `{}` (structure {:?})",
                self.theorem,
                spec.name(),
                spec.structure
            )
        })?;
        Ok((spec, theorem))
    }
}

/// Contents of a `--config` TOML file. Every table is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: ProblemSection,
    pub solver: Option<SolverOptions>,
    pub grid: Option<GridOptions>,
    pub sampling: Option<SamplingOptions>,
    pub pmp: Option<PmpTolerances>,
    pub probes: Option<ProbeOptions>,
    pub emit: Option<EmitFlags>,
    pub theorem: Option<TheoremSelector>,
    pub time_optimal_nodes: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub name: Option<String>,
    pub overrides: BTreeMap<String, f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Applies the file on top of `cfg`.
    pub fn apply(self, cfg: &mut RunConfig) {
        if let Some(name) = self.problem.name {
            cfg.problem = name;
        }
        cfg.overrides.extend(self.problem.overrides);
        if let Some(v) = self.solver {
            cfg.solver = v;
        }
        if let Some(v) = self.grid {
            cfg.grid = v;
        }
        if let Some(v) = self.sampling {
            cfg.sampling = v;
        }
        if let Some(v) = self.pmp {
            cfg.pmp = v;
        }
        if let Some(v) = self.probes {
            cfg.probes = v;
        }
        if let Some(v) = self.emit {
            cfg.emit = v;
        }
        if let Some(v) = self.theorem {
            cfg.theorem = v;
        }
        if self.time_optimal_nodes.is_some() {
            cfg.time_optimal_nodes = self.time_optimal_nodes;
        }
    }
}

/// Parses `key=value` with a floating-point value.
pub fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(format!("empty key in `{s}`"));
    }
    let value = v.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))?;
    Ok((key.to_string(), value))
}
