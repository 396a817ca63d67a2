use std::fmt;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Deserialize;
use thiserror::Error;

use crate::model::{
    BlockGraphon, ControlBound, ExistenceReport, GroupParams, ModelError, PiecewiseConstant,
    Policy,
};
use crate::solver::{
    solve_equilibrium, EquilibriumResult, Integrator, SolverConfig, SolverError, TimeGrid,
};

/// A fully validated problem instance: grid, graphon, per-block parameters,
/// policy, control bound, and solver settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: TimeGrid,
    pub graphon: BlockGraphon,
    pub block_names: Vec<String>,
    pub params: Vec<GroupParams>,
    pub policy: Policy,
    pub bound: ControlBound,
    pub solver: SolverConfig,
}

impl Scenario {
    /// Runs the fixed-point solver on this scenario.
    pub fn solve(&self) -> Result<EquilibriumResult, SolverError> {
        solve_equilibrium(
            &self.grid,
            &self.graphon,
            &self.params,
            &self.policy,
            &self.bound,
            &self.solver,
        )
    }

    /// Existence diagnostic for this scenario's horizon and bounds.
    pub fn existence(&self) -> ExistenceReport {
        crate::model::existence_bound(
            self.grid.t_horizon(),
            &self.params,
            &self.policy,
            &self.bound,
        )
    }

    pub fn n_blocks(&self) -> usize {
        self.graphon.n_blocks()
    }

    /// Parses and validates a scenario from config text.
    pub fn from_toml_str(name: &str, text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            name: name.to_string(),
            message: e.to_string(),
        })?;
        build(name, raw)
    }
}

/// Failure to locate, parse, or validate a scenario config.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {name}: {message}")]
    Parse { name: String, message: String },
    #[error("invalid scenario {name}: {field}: {reason}")]
    Invalid {
        name: String,
        field: String,
        reason: String,
    },
    #[error("unknown scenario preset {0:?}; known presets: {1}")]
    UnknownPreset(String, PresetList),
}

/// Helper that formats the preset list in error messages.
#[derive(Debug)]
pub struct PresetList;

impl fmt::Display for PresetList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&preset_names().join(", "))
    }
}

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../../configs/", $name, ".cfg")))),*
        ];
    };
}

presets![
    "experiment1-policy0",
    "experiment1-policy1",
    "experiment1-policy2",
    "experiment2-scheme0",
    "experiment2-scheme1",
    "experiment2-scheme2",
    "experiment2-scheme3",
    "experiment2-scheme4",
    "zero-graphon",
    "short-horizon",
];

/// Names of the scenarios shipped with the crate.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub(crate) fn load_preset(name: &str) -> Result<Scenario, ScenarioError> {
    let key = name.strip_suffix(".cfg").unwrap_or(name);
    match PRESETS.iter().find(|(n, _)| *n == key) {
        Some((n, text)) => Scenario::from_toml_str(n, text),
        None => Err(ScenarioError::UnknownPreset(name.to_string(), PresetList)),
    }
}

/// Loads a scenario from a config file, falling back to the named preset
/// when no such file exists and the path is a bare name (optionally with a
/// `.cfg` extension).
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".to_string());
        return Scenario::from_toml_str(&name, &text);
    }
    let bare = path
        .parent()
        .map_or(true, |parent| parent.as_os_str().is_empty());
    if bare {
        if let Some(name) = path.to_str() {
            return load_preset(name);
        }
    }
    Err(ScenarioError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
    })
}

// ---------------------------------------------------------------------------
// raw config schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: RawGrid,
    graphon: RawGraphon,
    blocks: IndexMap<String, RawBlock>,
    policy: RawPolicy,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(rename = "T")]
    t: f64,
    n_steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraphon {
    /// Row-major connection strengths, one inner array per block row.
    weights: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    beta_s: f64,
    beta_k: f64,
    beta_i: f64,
    mu_k: f64,
    mu_i: f64,
    #[serde(default)]
    gamma: f64,
    #[serde(default)]
    c: f64,
    p0: [f64; 4],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    lambda_k: RawLambda,
    lambda_i: RawLambda,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawLambda {
    Constant(f64),
    Piecewise(RawPiecewise),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiecewise {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_iters")]
    max_iters: usize,
    #[serde(default = "default_damping")]
    damping: f64,
    #[serde(default)]
    integrator: Integrator,
    #[serde(default = "default_a_max")]
    a_max: f64,
}

fn default_tol() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    500
}
fn default_damping() -> f64 {
    0.5
}
fn default_a_max() -> f64 {
    5.0
}

impl Default for RawSolver {
    fn default() -> Self {
        RawSolver {
            tol: default_tol(),
            max_iters: default_max_iters(),
            damping: default_damping(),
            integrator: Integrator::default(),
            a_max: default_a_max(),
        }
    }
}

fn invalid(name: &str, field: impl Into<String>, reason: impl ToString) -> ScenarioError {
    ScenarioError::Invalid {
        name: name.to_string(),
        field: field.into(),
        reason: reason.to_string(),
    }
}

fn model_field(prefix: &str, err: &ModelError) -> (String, String) {
    match err {
        ModelError::Invalid { field, reason } => (format!("{prefix}{field}"), reason.clone()),
        ModelError::NonFinite(field) => {
            (format!("{prefix}{field}"), "non-finite value".to_string())
        }
        other => (prefix.trim_end_matches('.').to_string(), other.to_string()),
    }
}

fn build(name: &str, raw: RawConfig) -> Result<Scenario, ScenarioError> {
    let grid = TimeGrid::new(raw.grid.t, raw.grid.n_steps)
        .map_err(|e| invalid(name, "grid", e))?;

    let graphon = BlockGraphon::from_rows(&raw.graphon.weights, raw.graphon.masses)
        .map_err(|e| {
            let (field, reason) = model_field("graphon.", &e);
            invalid(name, field, reason)
        })?;

    if raw.blocks.is_empty() {
        return Err(invalid(name, "blocks", "at least one block required"));
    }
    if raw.blocks.len() != graphon.n_blocks() {
        return Err(invalid(
            name,
            "blocks",
            format!(
                "{} block sections but the graphon has {} blocks",
                raw.blocks.len(),
                graphon.n_blocks()
            ),
        ));
    }

    let mut block_names = Vec::with_capacity(raw.blocks.len());
    let mut params = Vec::with_capacity(raw.blocks.len());
    for (block_name, b) in &raw.blocks {
        let p = GroupParams {
            beta_s: b.beta_s,
            beta_k: b.beta_k,
            beta_i: b.beta_i,
            mu_k: b.mu_k,
            mu_i: b.mu_i,
            gamma: b.gamma,
            c: b.c,
            p0: b.p0,
        };
        p.validate().map_err(|e| {
            let (field, reason) = model_field(&format!("blocks.{block_name}."), &e);
            invalid(name, field, reason)
        })?;
        block_names.push(block_name.clone());
        params.push(p);
    }

    let dt = grid.dt();
    let lambda_k = build_lambda(name, "policy.lambda_k", &raw.policy.lambda_k, dt)?;
    let lambda_i = build_lambda(name, "policy.lambda_i", &raw.policy.lambda_i, dt)?;
    let policy = Policy { lambda_i, lambda_k };
    policy.validate().map_err(|e| {
        let (field, reason) = model_field("policy.", &e);
        invalid(name, field, reason)
    })?;

    let bound = ControlBound::new(raw.solver.a_max);
    bound
        .validate()
        .map_err(|e| invalid(name, "solver.a_max", e))?;

    let solver = SolverConfig {
        tol: raw.solver.tol,
        max_iters: raw.solver.max_iters,
        damping: raw.solver.damping,
        integrator: raw.solver.integrator,
    };
    solver.validate().map_err(|e| invalid(name, "solver", e))?;

    Ok(Scenario {
        name: name.to_string(),
        grid,
        graphon,
        block_names,
        params,
        policy,
        bound,
        solver,
    })
}

/// Builds a policy coefficient, snapping breakpoints to the time grid.
fn build_lambda(
    name: &str,
    field: &str,
    raw: &RawLambda,
    dt: f64,
) -> Result<PiecewiseConstant, ScenarioError> {
    let f = match raw {
        RawLambda::Constant(v) => PiecewiseConstant::constant(*v),
        RawLambda::Piecewise(pw) => {
            PiecewiseConstant::new(pw.breakpoints.clone(), pw.values.clone())
                .map_err(|e| invalid(name, field, e))?
        }
    };
    Ok(f.snapped_to_grid(dt))
}
