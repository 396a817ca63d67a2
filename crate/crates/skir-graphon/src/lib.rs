//! Nash equilibria of controlled SKIR rumor propagation on block graphons.
//!
//! A population of agents spreads truth (state `K`) and rumor (state `I`)
//! through graphon-weighted meetings, each agent choosing a communication
//! rate to minimize a running-plus-terminal cost. On a piecewise-constant
//! (block) graphon the equilibrium reduces to a finite system of coupled
//! forward Kolmogorov and backward Hamilton-Jacobi-Bellman ODEs, which this
//! crate solves by damped fixed-point iteration.
//!
//! The crate is organized in four layers:
//!
//! - [`model`] — the stateless game primitives: states, rates, costs,
//!   closed-form equilibrium controls, and the existence diagnostic.
//! - [`solver`] — time discretization, forward/backward integration, and
//!   the fixed-point loop producing an [`solver::EquilibriumResult`].
//! - [`verify`] — independent oracles: closed-form decoupled solutions,
//!   best-response/exploitability checks, and a finite-player Monte-Carlo
//!   simulator.
//! - [`experiments`] — scenario configs, canned policy/scheme comparisons,
//!   and CSV/SVG emission.
//!
//! A narrative guide with runnable examples lives in `book/`; its code
//! snippets double as doc-tests of this crate.

pub mod experiments;
pub mod model;
pub mod solver;
pub mod verify;

#[cfg(doctest)]
mod book;
