//! Stateless primitives of the controlled SKIR graphon game.
//!
//! Everything here is a pure function of its arguments: the transition-rate
//! matrix, running and terminal costs, the closed-form equilibrium controls,
//! the Hamiltonian they minimize, and the horizon-smallness condition that
//! guarantees existence of an equilibrium. The [`crate::solver`] module
//! composes these into the coupled forward-backward system.

mod control;
mod cost;
mod dynamics;
mod graphon;
mod params;
mod policy;
mod state;

pub use control::{
    existence_bound, hamiltonian, optimal_control, optimal_control_raw, ExistenceReport,
};
pub use cost::{running_cost, terminal_cost};
pub use dynamics::{q_matrix, QMatrix};
pub use graphon::BlockGraphon;
pub use params::{Aggregates, ControlBound, GroupParams};
pub use policy::{PiecewiseConstant, Policy};
pub use state::StateId;

pub(crate) use dynamics::{generator, q_row};

use thiserror::Error;

/// Tolerance for probability vectors and block masses summing to one.
pub const MASS_SUM_TOL: f64 = 1e-12;

/// Validation failure in a model type or operation input.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    /// A control rate outside the admissible interval `[0, a_max]`.
    #[error("control rate {alpha} outside [0, {a_max}]")]
    ControlOutOfBounds { alpha: f64, a_max: f64 },
    /// An input that must be finite was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// A field violates one of its documented invariants.
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl ModelError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ModelError::Invalid {
            field,
            reason: reason.into(),
        }
    }
}
