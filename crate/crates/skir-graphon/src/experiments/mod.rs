//! Scenario ingestion, canned experiments, and report emission.

mod emit;
mod report;
mod scenario;
mod svg;

pub use emit::{emit_report, EmitError, FileManifest};
pub use report::{
    run_experiment1, run_experiment2, BlockSummary, ComparisonReport, ExperimentOverrides,
    RunError, ScenarioRun,
};
pub use scenario::{load_scenario, preset_names, Scenario, ScenarioError};
