//! Discretization and fixed-point solution of the coupled forward-backward
//! system.
//!
//! A solve alternates three steps on a uniform time grid until the flows
//! stop moving: compute the graphon aggregates from the current controls
//! and distributions, integrate the value function backward (recording the
//! minimizing control at every node), and integrate the distribution
//! forward under that control. The update into the next iteration is
//! damped to stabilize the loop outside the contraction regime.

mod fixed_point;
mod flow;
mod grid;
mod integrate;
mod rhs;

pub use fixed_point::{solve_equilibrium, EquilibriumResult, SolverConfig};
pub use flow::{residual_norm, FlowGrid};
pub use grid::TimeGrid;
pub use integrate::{integrate_hjb_backward, integrate_kfp_forward, Integrator};
pub use rhs::{compute_aggregates, hjb_rhs, kfp_rhs};

pub(crate) use integrate::{euler_step, rk4_step};

use crate::model::ModelError;
use thiserror::Error;

/// Failure while building or running a solve.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("integration produced non-finite values at t = {t} ({context})")]
    NonFinite { t: f64, context: &'static str },
    #[error("probability mass collapsed at t = {t}")]
    MassCollapse { t: f64 },
}
