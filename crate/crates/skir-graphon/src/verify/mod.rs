//! Independent oracles for checking solver output.
//!
//! Three routes that do not share the solver's fixed-point machinery:
//! closed-form solutions of the decoupled (zero-graphon) system, a
//! best-response evaluation that operationalizes the Nash property against
//! frozen aggregates, and a finite-player Monte-Carlo simulator of the
//! original N-agent jump process.

mod analytic;
mod best_response;
mod sim;

pub use analytic::analytic_decoupled;
pub use best_response::{best_response_value, evaluate_control, exploitability, BestResponseValues};
pub use sim::{simulate_finite_player, SimConfig, SimMethod, SimResult};

use crate::model::ModelError;
use crate::solver::SolverError;
use thiserror::Error;

/// Failure in an oracle computation or simulation setup.
#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
    #[error("oracle precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
