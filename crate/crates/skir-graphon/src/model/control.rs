use super::{
    q_row, running_cost, Aggregates, ControlBound, GroupParams, ModelError, Policy, StateId,
};

/// Unconstrained minimizer of the Hamiltonian in the control, per state:
///
/// - `S`: `1 + beta_s*z_k*(u_s - u_k) + beta_s*z_i*(u_s - u_i)`
/// - `K`: `1 + beta_k*z_i*(u_k - u_i)`
/// - `I`: `(lambda_i(t) + 1 + beta_i*z_k*(u_i - u_k)) / 2`
/// - `R`: `1`
///
/// Exposed for diagnostics; the equilibrium control is the clipped value
/// from [`optimal_control`].
#[inline]
pub fn optimal_control_raw(
    t: f64,
    e: StateId,
    z: Aggregates,
    u_row: [f64; 4],
    params: &GroupParams,
    policy: &Policy,
) -> f64 {
    let [u_s, u_k, u_i, _u_r] = u_row;
    match e {
        StateId::S => 1.0 + params.beta_s * z.z_k * (u_s - u_k) + params.beta_s * z.z_i * (u_s - u_i),
        StateId::K => 1.0 + params.beta_k * z.z_i * (u_k - u_i),
        StateId::I => 0.5 * (policy.lambda_i.value_at(t) + 1.0 + params.beta_i * z.z_k * (u_i - u_k)),
        StateId::R => 1.0,
    }
}

/// Equilibrium communication rate: the Hamiltonian minimizer projected onto
/// the admissible interval `[0, a_max]`. Since the Hamiltonian is a strictly
/// convex parabola in the control, the projection is the exact constrained
/// argmin.
pub fn optimal_control(
    t: f64,
    e: StateId,
    z: Aggregates,
    u_row: [f64; 4],
    params: &GroupParams,
    policy: &Policy,
    bound: &ControlBound,
) -> Result<f64, ModelError> {
    if u_row.iter().any(|u| !u.is_finite()) {
        return Err(ModelError::NonFinite("u_row"));
    }
    z.validate()?;
    Ok(bound.clip(optimal_control_raw(t, e, z, u_row, params, policy)))
}

/// The Hamiltonian of one agent: expected drift of the value function under
/// rate `alpha` plus the running cost,
/// `sum_e' q(e, e')*u(e') + f(t, e, alpha)`.
pub fn hamiltonian(
    t: f64,
    e: StateId,
    z: Aggregates,
    u_row: [f64; 4],
    alpha: f64,
    params: &GroupParams,
    policy: &Policy,
) -> f64 {
    let row = q_row(params, e, alpha, z);
    let drift: f64 = row.iter().zip(u_row.iter()).map(|(q, u)| q * u).sum();
    drift + running_cost(t, e, alpha, policy)
}

/// Diagnostic value of the horizon-smallness condition that guarantees an
/// equilibrium exists:
/// `T * beta_bar * (max((lambda_i_bar + a_max)^2 / 2, lambda_k_bar) + (1 + a_max)^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceReport {
    /// Left-hand side of the smallness condition.
    pub value: f64,
    /// Whether `value < 1`, i.e. existence is guaranteed by contraction.
    pub satisfied: bool,
    /// Largest meeting intensity over all blocks and states.
    pub beta_bar: f64,
    /// Supremum of `|lambda_i|` over the horizon.
    pub lambda_i_bound: f64,
    /// Supremum of `|lambda_k|` over the horizon.
    pub lambda_k_bound: f64,
}

/// Evaluates the existence condition for a set of blocks. Purely
/// diagnostic: the solver runs regardless of the verdict.
pub fn existence_bound(
    t_horizon: f64,
    params: &[GroupParams],
    policy: &Policy,
    bound: &ControlBound,
) -> ExistenceReport {
    let beta_bar = params.iter().map(GroupParams::max_beta).fold(0.0, f64::max);
    let lambda_i_bound = policy.lambda_i_bound();
    let lambda_k_bound = policy.lambda_k_bound();
    let a_max = bound.a_max;
    let rumor_term = 0.5 * (lambda_i_bound + a_max) * (lambda_i_bound + a_max);
    let effort_term = 0.5 * (1.0 + a_max) * (1.0 + a_max);
    let value = t_horizon * beta_bar * (rumor_term.max(lambda_k_bound) + effort_term);
    ExistenceReport {
        value,
        satisfied: value < 1.0,
        beta_bar,
        lambda_i_bound,
        lambda_k_bound,
    }
}
