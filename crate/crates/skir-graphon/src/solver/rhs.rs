use super::SolverError;
use crate::model::{
    self, Aggregates, BlockGraphon, ControlBound, GroupParams, Policy, StateId,
};

const K_IDX: usize = StateId::K.index();
const I_IDX: usize = StateId::I.index();

/// Graphon aggregates for every block: the block structure turns the
/// population integral into a mass-weighted sum,
/// `z_i[k] = sum_l w[k][l] * m[l] * phi[l][I] * p[l][I]` and the `K`
/// analogue.
pub fn compute_aggregates(
    graphon: &BlockGraphon,
    phi_slice: &[[f64; 4]],
    p_slice: &[[f64; 4]],
) -> Result<Vec<Aggregates>, SolverError> {
    let n = graphon.n_blocks();
    if phi_slice.len() != n || p_slice.len() != n {
        return Err(SolverError::ShapeMismatch(format!(
            "{n} blocks but {} control rows and {} distribution rows",
            phi_slice.len(),
            p_slice.len()
        )));
    }
    let mut out = vec![Aggregates::ZERO; n];
    aggregates_into(graphon, phi_slice, p_slice, &mut out);
    Ok(out)
}

/// Allocation-free aggregate computation. Blocks are accumulated in fixed
/// index order so the result is bitwise reproducible.
pub(crate) fn aggregates_into(
    graphon: &BlockGraphon,
    phi_slice: &[[f64; 4]],
    p_slice: &[[f64; 4]],
    out: &mut [Aggregates],
) {
    let masses = graphon.masses();
    for (k, agg) in out.iter_mut().enumerate() {
        let row = graphon.row(k);
        let mut z_k = 0.0;
        let mut z_i = 0.0;
        for l in 0..masses.len() {
            let wm = row[l] * masses[l];
            z_k += wm * phi_slice[l][K_IDX] * p_slice[l][K_IDX];
            z_i += wm * phi_slice[l][I_IDX] * p_slice[l][I_IDX];
        }
        *agg = Aggregates::new(z_k, z_i);
    }
}

/// Forward drift of one block's distribution: the row-vector-matrix product
/// `p * Q`, where row `e` of the generator uses that state's own control
/// `phi_row[e]` (agents leaving a state jump at the rate they chose there).
pub(crate) fn kfp_rhs_block(
    p_row: [f64; 4],
    phi_row: [f64; 4],
    z: Aggregates,
    params: &GroupParams,
) -> [f64; 4] {
    let gen = model::generator(params, phi_row, z);
    let mut dp = [0.0; 4];
    for e in 0..4 {
        let pe = p_row[e];
        for (e2, d) in dp.iter_mut().enumerate() {
            *d += pe * gen[e][e2];
        }
    }
    dp
}

/// Forward drift for all blocks. Panics on inconsistent shapes; the
/// public integrators validate shapes up front.
pub fn kfp_rhs(
    p_slice: &[[f64; 4]],
    phi_slice: &[[f64; 4]],
    z: &[Aggregates],
    params: &[GroupParams],
) -> Vec<[f64; 4]> {
    assert!(
        p_slice.len() == params.len()
            && phi_slice.len() == params.len()
            && z.len() == params.len(),
        "kfp_rhs: inconsistent block counts"
    );
    (0..params.len())
        .map(|k| kfp_rhs_block(p_slice[k], phi_slice[k], z[k], &params[k]))
        .collect()
}

/// Backward drift of one block's value function together with the
/// minimizing control it was evaluated at.
///
/// This implements the four equilibrium equations directly, e.g.
/// `du_s = beta_s*phi_s*z_k*(u_s - u_k) + beta_s*phi_s*z_i*(u_s - u_i)
///        - (1 - phi_s)^2 / 2`,
/// with the relapse extension `du_r = gamma*(u_r - u_s)`. Each equation is
/// algebraically the negated Hamiltonian at the clipped minimizer, which is
/// what the tests pin it against.
pub(crate) fn hjb_rhs_block(
    u_row: [f64; 4],
    z: Aggregates,
    t: f64,
    params: &GroupParams,
    policy: &Policy,
    bound: &ControlBound,
) -> ([f64; 4], [f64; 4]) {
    let phi = [
        bound.clip(model::optimal_control_raw(t, StateId::S, z, u_row, params, policy)),
        bound.clip(model::optimal_control_raw(t, StateId::K, z, u_row, params, policy)),
        bound.clip(model::optimal_control_raw(t, StateId::I, z, u_row, params, policy)),
        1.0,
    ];
    let [u_s, u_k, u_i, u_r] = u_row;
    let lambda_i = policy.lambda_i.value_at(t);
    let lambda_k = policy.lambda_k.value_at(t);

    let eff_s = 1.0 - phi[0];
    let du_s = params.beta_s * phi[0] * z.z_k * (u_s - u_k)
        + params.beta_s * phi[0] * z.z_i * (u_s - u_i)
        - 0.5 * eff_s * eff_s;

    let eff_k = 1.0 - phi[1];
    let du_k = params.beta_k * phi[1] * z.z_i * (u_k - u_i)
        + params.mu_k * (u_k - u_r)
        + lambda_k
        - 0.5 * eff_k * eff_k;

    let eff_i = 1.0 - phi[2];
    let gap_i = lambda_i - phi[2];
    let du_i = params.beta_i * phi[2] * z.z_k * (u_i - u_k)
        + params.mu_i * (u_i - u_r)
        - 0.5 * eff_i * eff_i
        - 0.5 * gap_i * gap_i;

    let du_r = params.gamma * (u_r - u_s);

    ([du_s, du_k, du_i, du_r], phi)
}

/// Backward drift for all blocks.
pub fn hjb_rhs(
    u_slice: &[[f64; 4]],
    z: &[Aggregates],
    t: f64,
    params: &[GroupParams],
    policy: &Policy,
    bound: &ControlBound,
) -> Vec<[f64; 4]> {
    assert!(
        u_slice.len() == params.len() && z.len() == params.len(),
        "hjb_rhs: inconsistent block counts"
    );
    (0..params.len())
        .map(|k| hjb_rhs_block(u_slice[k], z[k], t, &params[k], policy, bound).0)
        .collect()
}

/// Clips small negative entries to zero and rescales the row to unit mass.
/// Returns the size of the applied correction; the caller warns when it is
/// large enough to indicate real instability.
pub(crate) fn renormalize_row(row: &mut [f64; 4]) -> Result<f64, f64> {
    let sum: f64 = row.iter().sum();
    let needs_clip = row.iter().any(|p| *p < 0.0);
    if !needs_clip && (sum - 1.0).abs() <= 1e-12 {
        return Ok(0.0);
    }
    let before = *row;
    for p in row.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let clipped: f64 = row.iter().sum();
    if clipped <= 0.0 {
        return Err(sum);
    }
    for p in row.iter_mut() {
        *p /= clipped;
    }
    let correction = before
        .iter()
        .zip(row.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(correction)
}
