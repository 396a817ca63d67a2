use super::VerifyError;
use crate::model::{self, Aggregates, ControlBound, GroupParams, Policy, StateId};
use crate::solver::{
    euler_step, integrate_hjb_backward, rk4_step, FlowGrid, Integrator, SolverError, TimeGrid,
};

/// Time-zero value vectors of the best response and of the evaluated
/// equilibrium control, both against the same frozen aggregates.
#[derive(Debug, Clone, Copy)]
pub struct BestResponseValues {
    /// Value of the best response (fresh backward minimization).
    pub u0_br: [f64; 4],
    /// Value of the candidate control evaluated without minimization.
    pub u0_eq: [f64; 4],
}

impl BestResponseValues {
    /// Componentwise gain from deviating; nonnegative up to rounding.
    pub fn gap(&self) -> [f64; 4] {
        [
            self.u0_eq[0] - self.u0_br[0],
            self.u0_eq[1] - self.u0_br[1],
            self.u0_eq[2] - self.u0_br[2],
            self.u0_eq[3] - self.u0_br[3],
        ]
    }
}

/// Extracts one block's aggregate series from a flow grid.
fn block_aggregates(flows: &FlowGrid, block: usize) -> (Vec<f64>, Vec<f64>) {
    let nb = flows.n_blocks();
    let n_nodes = flows.n_nodes();
    let mut z_k = Vec::with_capacity(n_nodes);
    let mut z_i = Vec::with_capacity(n_nodes);
    for node in 0..n_nodes {
        z_k.push(flows.z_k[node * nb + block]);
        z_i.push(flows.z_i[node * nb + block]);
    }
    (z_k, z_i)
}

/// Unilateral-deviation check for one block: freezes the aggregate fields
/// of `flows`, solves the single-agent backward minimization under them
/// (the best response by construction), and separately evaluates the cost
/// of the control field recorded in `flows` against the same aggregates.
/// Returns both time-zero value vectors.
pub fn best_response_value(
    flows: &FlowGrid,
    block: usize,
    grid: &TimeGrid,
    params: &GroupParams,
    policy: &Policy,
    bound: &ControlBound,
    integrator: Integrator,
) -> Result<BestResponseValues, VerifyError> {
    if block >= flows.n_blocks() {
        return Err(VerifyError::Precondition(format!(
            "block {block} out of range ({} blocks)",
            flows.n_blocks()
        )));
    }
    if flows.n_nodes() != grid.n_nodes() {
        return Err(VerifyError::Solver(SolverError::ShapeMismatch(format!(
            "{} flow nodes vs {} grid nodes",
            flows.n_nodes(),
            grid.n_nodes()
        ))));
    }
    let (z_k, z_i) = block_aggregates(flows, block);
    let single = [params.clone()];
    let (u_br, _) =
        integrate_hjb_backward(grid, &single, policy, bound, &z_k, &z_i, integrator)?;

    let nb = flows.n_blocks();
    let phi_block: Vec<[f64; 4]> = (0..flows.n_nodes())
        .map(|node| flows.phi[node * nb + block])
        .collect();
    let u_eq = evaluate_control(grid, params, policy, &phi_block, &z_k, &z_i, integrator)?;

    Ok(BestResponseValues {
        u0_br: u_br[0],
        u0_eq: u_eq[0],
    })
}

/// Cost-to-go of a fixed control field against frozen aggregates: the
/// linear backward evaluation `du/dt = -(sum_e' q(e,e') u(e') + f)` at
/// `alpha = phi(t, e)`, with no minimization. Control and aggregates are
/// interpolated linearly inside integrator stages.
pub fn evaluate_control(
    grid: &TimeGrid,
    params: &GroupParams,
    policy: &Policy,
    phi: &[[f64; 4]],
    z_k: &[f64],
    z_i: &[f64],
    integrator: Integrator,
) -> Result<Vec<[f64; 4]>, VerifyError> {
    let n_nodes = grid.n_nodes();
    if phi.len() != n_nodes || z_k.len() != n_nodes || z_i.len() != n_nodes {
        return Err(VerifyError::Solver(SolverError::ShapeMismatch(format!(
            "evaluation fields ({}, {}, {}) vs {n_nodes} nodes",
            phi.len(),
            z_k.len(),
            z_i.len()
        ))));
    }
    let n_steps = grid.n_steps();
    let dt = grid.dt();
    let mut u = vec![[0.0; 4]; n_nodes];
    u[n_steps] = [0.0, 0.0, params.c, 0.0];

    for i in (0..n_steps).rev() {
        let t_hi = grid.node_time(i + 1);
        let z_hi = Aggregates::new(z_k[i + 1], z_i[i + 1]);
        let z_lo = Aggregates::new(z_k[i], z_i[i]);
        let phi_hi = phi[i + 1];
        let phi_lo = phi[i];
        let rhs = |w: f64, y: [f64; 4]| {
            let t = t_hi - w * dt;
            let z = Aggregates::new(
                z_hi.z_k + w * (z_lo.z_k - z_hi.z_k),
                z_hi.z_i + w * (z_lo.z_i - z_hi.z_i),
            );
            let mut du = [0.0; 4];
            for e in StateId::ALL {
                let a = phi_hi[e.index()] + w * (phi_lo[e.index()] - phi_hi[e.index()]);
                du[e.index()] = -model::hamiltonian(t, e, z, y, a, params, policy);
            }
            du
        };
        let next = match integrator {
            Integrator::Rk4 => rk4_step(u[i + 1], -dt, rhs),
            Integrator::Euler => euler_step(u[i + 1], -dt, rhs),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(VerifyError::Solver(SolverError::NonFinite {
                t: grid.node_time(i),
                context: "control evaluation sweep",
            }));
        }
        u[i] = next;
    }
    Ok(u)
}

/// Scalar exploitability of a flow field: for each block, the best-response
/// gap at time zero weighted by the initial distribution, maximized over
/// blocks. Zero (up to solver tolerance) exactly at a Nash equilibrium.
pub fn exploitability(
    flows: &FlowGrid,
    grid: &TimeGrid,
    params: &[GroupParams],
    policy: &Policy,
    bound: &ControlBound,
    integrator: Integrator,
) -> Result<f64, VerifyError> {
    if params.len() != flows.n_blocks() {
        return Err(VerifyError::Solver(SolverError::ShapeMismatch(format!(
            "{} parameter blocks vs {} flow blocks",
            params.len(),
            flows.n_blocks()
        ))));
    }
    let mut worst = f64::NEG_INFINITY;
    for (k, pk) in params.iter().enumerate() {
        let values = best_response_value(flows, k, grid, pk, policy, bound, integrator)?;
        let gap = values.gap();
        let weighted: f64 = pk.p0.iter().zip(gap.iter()).map(|(p, g)| p * g).sum();
        worst = worst.max(weighted);
    }
    Ok(worst)
}
