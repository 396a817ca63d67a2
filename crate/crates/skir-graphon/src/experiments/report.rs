use thiserror::Error;

use super::scenario::{load_preset, Scenario, ScenarioError};
use crate::model::{BlockGraphon, ControlBound, Policy, StateId};
use crate::solver::{EquilibriumResult, SolverConfig, SolverError, TimeGrid};

/// Optional adjustments applied on top of a canned scenario before solving.
/// `policy` and `initial_rumor_mass` only apply to the platform experiment,
/// whose presets fix policy 0 and a total rumor mass of 0.03.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOverrides {
    pub t_horizon: Option<f64>,
    pub n_steps: Option<usize>,
    pub masses: Option<Vec<f64>>,
    pub solver: Option<SolverConfig>,
    pub a_max: Option<f64>,
    pub policy: Option<Policy>,
    pub initial_rumor_mass: Option<f64>,
}

/// Failure while assembling or solving an experiment batch.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("unknown {kind} id {id}; valid ids: {valid}")]
    InvalidSelection {
        kind: &'static str,
        id: usize,
        valid: &'static str,
    },
    #[error("empty selection")]
    EmptySelection,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Per-block scalar summaries of a solved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSummary {
    pub block: String,
    /// Largest rumor mass over the horizon.
    pub sup_p_i: f64,
    /// Rumor mass at the terminal time.
    pub terminal_p_i: f64,
    /// Time integral of the rumor mass.
    pub integral_p_i: f64,
    /// Time integral of the truth mass.
    pub integral_p_k: f64,
    /// Time-averaged communication rate in state K.
    pub mean_phi_k: f64,
    /// Time-averaged communication rate in state I.
    pub mean_phi_i: f64,
}

/// One solved scenario within a comparison.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub result: EquilibriumResult,
    pub summaries: Vec<BlockSummary>,
}

impl ScenarioRun {
    pub fn new(scenario: Scenario, result: EquilibriumResult) -> Self {
        let summaries = summarize(&scenario, &result);
        ScenarioRun {
            scenario,
            result,
            summaries,
        }
    }
}

/// A batch of solved scenarios with a designated baseline for deltas.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub runs: Vec<ScenarioRun>,
    /// Index into `runs` of the baseline scenario.
    pub baseline: usize,
}

impl ComparisonReport {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.result.converged)
    }

    pub fn run_by_name(&self, name: &str) -> Option<&ScenarioRun> {
        self.runs.iter().find(|r| r.scenario.name == name)
    }
}

/// Trapezoid rule over the node values of one series.
fn trapezoid(values: impl Iterator<Item = f64>, dt: f64) -> f64 {
    let vals: Vec<f64> = values.collect();
    if vals.len() < 2 {
        return 0.0;
    }
    let interior: f64 = vals[1..vals.len() - 1].iter().sum();
    dt * (0.5 * (vals[0] + vals[vals.len() - 1]) + interior)
}

pub(crate) fn summarize(scenario: &Scenario, result: &EquilibriumResult) -> Vec<BlockSummary> {
    let flows = &result.flows;
    let grid = &scenario.grid;
    let dt = grid.dt();
    let horizon = grid.t_horizon();
    let nb = flows.n_blocks();
    let i_idx = StateId::I.index();
    let k_idx = StateId::K.index();
    (0..nb)
        .map(|b| {
            let p_i = (0..flows.n_nodes()).map(|n| flows.p[n * nb + b][i_idx]);
            let p_k = (0..flows.n_nodes()).map(|n| flows.p[n * nb + b][k_idx]);
            let phi_k = (0..flows.n_nodes()).map(|n| flows.phi[n * nb + b][k_idx]);
            let phi_i = (0..flows.n_nodes()).map(|n| flows.phi[n * nb + b][i_idx]);
            BlockSummary {
                block: scenario.block_names[b].clone(),
                sup_p_i: p_i.clone().fold(f64::NEG_INFINITY, f64::max),
                terminal_p_i: flows.p[(flows.n_nodes() - 1) * nb + b][i_idx],
                integral_p_i: trapezoid(p_i, dt),
                integral_p_k: trapezoid(p_k, dt),
                mean_phi_k: trapezoid(phi_k, dt) / horizon,
                mean_phi_i: trapezoid(phi_i, dt) / horizon,
            }
        })
        .collect()
}

fn apply_overrides(
    scenario: &mut Scenario,
    overrides: &ExperimentOverrides,
    scheme_block: Option<Option<usize>>,
) -> Result<(), RunError> {
    if overrides.t_horizon.is_some() || overrides.n_steps.is_some() {
        let t = overrides.t_horizon.unwrap_or(scenario.grid.t_horizon());
        let n = overrides.n_steps.unwrap_or(scenario.grid.n_steps());
        scenario.grid = TimeGrid::new(t, n)?;
    }
    if let Some(masses) = &overrides.masses {
        let rows: Vec<Vec<f64>> = (0..scenario.graphon.n_blocks())
            .map(|i| scenario.graphon.row(i).to_vec())
            .collect();
        scenario.graphon = BlockGraphon::from_rows(&rows, masses.clone())
            .map_err(SolverError::Model)?;
    }
    if let Some(solver) = overrides.solver {
        scenario.solver = solver;
    }
    if let Some(a_max) = overrides.a_max {
        let bound = ControlBound::new(a_max);
        bound.validate().map_err(SolverError::Model)?;
        scenario.bound = bound;
    }
    if let Some(policy) = &overrides.policy {
        scenario.policy = policy.clone();
    }
    if let (Some(mass), Some(target)) = (overrides.initial_rumor_mass, scheme_block) {
        let i_idx = StateId::I.index();
        let s_idx = StateId::S.index();
        for (b, p) in scenario.params.iter_mut().enumerate() {
            let share = match target {
                None => mass / scenario.block_names.len() as f64,
                Some(t) if t == b => mass,
                Some(_) => 0.0,
            };
            p.p0[i_idx] = share;
            p.p0[s_idx] = 1.0 - p.p0[1] - p.p0[2] - p.p0[3];
            p.validate().map_err(SolverError::Model)?;
        }
    }
    Ok(())
}

fn solve_batch(
    mut scenarios: Vec<Scenario>,
    baseline: usize,
) -> Result<ComparisonReport, RunError> {
    let mut runs = Vec::with_capacity(scenarios.len());
    for scenario in scenarios.drain(..) {
        let result = scenario.solve()?;
        runs.push(ScenarioRun::new(scenario, result));
    }
    Ok(ComparisonReport { runs, baseline })
}

/// Solves the age-group scenario under the selected policies (0, 1, 2) and
/// reports them with deltas against policy 0 (or the lowest selected id if
/// 0 is absent). Non-convergence is flagged on the run, not raised.
pub fn run_experiment1(
    policy_ids: &[usize],
    overrides: &ExperimentOverrides,
) -> Result<ComparisonReport, RunError> {
    if policy_ids.is_empty() {
        return Err(RunError::EmptySelection);
    }
    let mut scenarios = Vec::new();
    for id in policy_ids {
        if *id > 2 {
            return Err(RunError::InvalidSelection {
                kind: "policy",
                id: *id,
                valid: "0, 1, 2",
            });
        }
        let mut s = load_preset(&format!("experiment1-policy{id}"))?;
        apply_overrides(&mut s, overrides, None)?;
        scenarios.push(s);
    }
    let baseline = policy_ids.iter().position(|id| *id == 0).unwrap_or(0);
    solve_batch(scenarios, baseline)
}

/// Solves the platform scenario under the selected seeding schemes (0-4:
/// spread the rumor mass across all platforms, or concentrate it on one)
/// and reports them with deltas against scheme 0 (or the lowest selected).
pub fn run_experiment2(
    scheme_ids: &[usize],
    overrides: &ExperimentOverrides,
) -> Result<ComparisonReport, RunError> {
    if scheme_ids.is_empty() {
        return Err(RunError::EmptySelection);
    }
    let mut scenarios = Vec::new();
    for id in scheme_ids {
        if *id > 4 {
            return Err(RunError::InvalidSelection {
                kind: "scheme",
                id: *id,
                valid: "0, 1, 2, 3, 4",
            });
        }
        let mut s = load_preset(&format!("experiment2-scheme{id}"))?;
        let scheme_block = if *id == 0 { None } else { Some(*id - 1) };
        apply_overrides(&mut s, overrides, Some(scheme_block))?;
        scenarios.push(s);
    }
    let baseline = scheme_ids.iter().position(|id| *id == 0).unwrap_or(0);
    solve_batch(scenarios, baseline)
}
