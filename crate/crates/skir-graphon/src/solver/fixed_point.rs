use super::flow::sup_diff_rows;
use super::rhs::{aggregates_into, kfp_rhs_block, renormalize_row};
use super::{
    integrate_hjb_backward, integrate_kfp_forward, FlowGrid, Integrator, SolverError, TimeGrid,
};
use crate::model::{self, Aggregates, BlockGraphon, ControlBound, GroupParams, Policy};

/// Knobs of the fixed-point loop.
///
/// `damping` blends the state that feeds the next aggregate computation:
/// `x <- damping * x + (1 - damping) * sweep(x)`. Zero damping is plain
/// Picard iteration, appropriate inside the contraction regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub integrator: Integrator,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-6,
            max_iters: 500,
            damping: 0.5,
            integrator: Integrator::Rk4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(SolverError::InvalidConfig(format!(
                "tol = {} must be positive",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig("max_iters = 0".into()));
        }
        if !self.damping.is_finite() || !(0.0..1.0).contains(&self.damping) {
            return Err(SolverError::InvalidConfig(format!(
                "damping = {} must lie in [0, 1)",
                self.damping
            )));
        }
        Ok(())
    }
}

/// A converged (or best-effort) solution of the coupled system, plus
/// convergence and existence diagnostics.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub flows: FlowGrid,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Left-hand side of the horizon-smallness existence condition.
    pub existence_value: f64,
    /// Whether the existence condition held (`existence_value < 1`).
    pub existence_satisfied: bool,
    /// Residual after each sweep, for convergence diagnostics.
    pub residual_history: Vec<f64>,
}

/// Solves the coupled forward-backward system by damped fixed-point
/// iteration.
///
/// Each sweep computes the aggregates from the current controls and
/// distributions, solves the value function backward under those aggregates
/// (recording the minimizing control), and pushes the distribution forward
/// under the fresh control. The residual compares successive sweep outputs
/// in the sup norm over `u` and `p`; damping only blends the state feeding
/// the next aggregates, so the reported flows are always an exact sweep
/// output and the converged result does not depend on the damping factor.
///
/// Initialization: distributions from the uncontrolled flow (everyone at
/// the natural rate 1), values extended from the terminal condition.
///
/// Non-convergence is not an error: the result carries `converged = false`
/// and the residual history.
pub fn solve_equilibrium(
    grid: &TimeGrid,
    graphon: &BlockGraphon,
    params: &[GroupParams],
    policy: &Policy,
    bound: &ControlBound,
    config: &SolverConfig,
) -> Result<EquilibriumResult, SolverError> {
    let nb = graphon.n_blocks();
    if params.len() != nb {
        return Err(SolverError::ShapeMismatch(format!(
            "{} parameter blocks for a {nb}-block graphon",
            params.len()
        )));
    }
    for p in params {
        p.validate()?;
    }
    policy.validate()?;
    bound.validate()?;
    config.validate()?;

    let existence = model::existence_bound(grid.t_horizon(), params, policy, bound);
    let n_nodes = grid.n_nodes();

    // state feeding the aggregate computation
    let mut p_cur = integrate_uncontrolled(grid, graphon, params, config.integrator)?;
    let mut u_cur: Vec<[f64; 4]> = (0..n_nodes)
        .flat_map(|_| params.iter().map(|pk| [0.0, 0.0, pk.c, 0.0]))
        .collect();
    let mut phi_cur = vec![[1.0; 4]; n_nodes * nb];

    let mut flows = FlowGrid::zeros(n_nodes, nb);
    let mut prev_u = u_cur.clone();
    let mut prev_p = p_cur.clone();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let mut agg_buf = vec![Aggregates::ZERO; nb];
    while iterations < config.max_iters {
        iterations += 1;

        for node in 0..n_nodes {
            let lo = node * nb;
            let hi = lo + nb;
            aggregates_into(graphon, &phi_cur[lo..hi], &p_cur[lo..hi], &mut agg_buf);
            for (k, z) in agg_buf.iter().enumerate() {
                flows.z_k[lo + k] = z.z_k;
                flows.z_i[lo + k] = z.z_i;
            }
        }

        let (u_new, phi_new) = integrate_hjb_backward(
            grid,
            params,
            policy,
            bound,
            &flows.z_k,
            &flows.z_i,
            config.integrator,
        )?;
        let p_new = integrate_kfp_forward(
            grid,
            params,
            &phi_new,
            &flows.z_k,
            &flows.z_i,
            config.integrator,
        )?;

        let residual = sup_diff_rows(&u_new, &prev_u).max(sup_diff_rows(&p_new, &prev_p));
        history.push(residual);
        prev_u.clone_from(&u_new);
        prev_p.clone_from(&p_new);

        if residual <= config.tol {
            converged = true;
            u_cur = u_new;
            p_cur = p_new;
            phi_cur = phi_new;
            break;
        }

        let theta = config.damping;
        for (cur, new) in u_cur.iter_mut().zip(u_new.iter()) {
            for e in 0..4 {
                cur[e] = theta * cur[e] + (1.0 - theta) * new[e];
            }
        }
        for (cur, new) in p_cur.iter_mut().zip(p_new.iter()) {
            for e in 0..4 {
                cur[e] = theta * cur[e] + (1.0 - theta) * new[e];
            }
        }
        phi_cur = phi_new;
    }

    if !converged {
        // report the last sweep output, not the damped blend
        u_cur = prev_u.clone();
        p_cur = prev_p.clone();
    }

    flows.u = u_cur;
    flows.p = p_cur;
    flows.phi = phi_cur;

    Ok(EquilibriumResult {
        flows,
        iterations,
        final_residual: history.last().copied().unwrap_or(f64::INFINITY),
        converged,
        existence_value: existence.value,
        existence_satisfied: existence.satisfied,
        residual_history: history,
    })
}

/// Forward flow with every agent at the natural rate 1; the aggregates are
/// recomputed from the evolving distribution at every integrator stage.
/// Used to initialize the fixed-point loop.
fn integrate_uncontrolled(
    grid: &TimeGrid,
    graphon: &BlockGraphon,
    params: &[GroupParams],
    integrator: Integrator,
) -> Result<Vec<[f64; 4]>, SolverError> {
    let nb = params.len();
    let n_nodes = grid.n_nodes();
    let dt = grid.dt();
    let ones = vec![[1.0; 4]; nb];
    let mut out = vec![[0.0; 4]; n_nodes * nb];
    for (k, pk) in params.iter().enumerate() {
        out[k] = pk.p0;
    }

    let rhs_all = |y: &[[f64; 4]], agg: &mut [Aggregates]| -> Vec<[f64; 4]> {
        aggregates_into(graphon, &ones, y, agg);
        (0..nb)
            .map(|k| kfp_rhs_block(y[k], [1.0; 4], agg[k], &params[k]))
            .collect()
    };

    let mut agg = vec![Aggregates::ZERO; nb];
    for i in 0..grid.n_steps() {
        let y: Vec<[f64; 4]> = out[i * nb..(i + 1) * nb].to_vec();
        let mut next: Vec<[f64; 4]> = match integrator {
            Integrator::Euler => {
                let k1 = rhs_all(&y, &mut agg);
                add_scaled_field(&y, &k1, dt)
            }
            Integrator::Rk4 => {
                let k1 = rhs_all(&y, &mut agg);
                let k2 = rhs_all(&add_scaled_field(&y, &k1, 0.5 * dt), &mut agg);
                let k3 = rhs_all(&add_scaled_field(&y, &k2, 0.5 * dt), &mut agg);
                let k4 = rhs_all(&add_scaled_field(&y, &k3, dt), &mut agg);
                let mut next = y.clone();
                for (row, (r1, (r2, (r3, r4)))) in next
                    .iter_mut()
                    .zip(k1.iter().zip(k2.iter().zip(k3.iter().zip(k4.iter()))))
                {
                    for e in 0..4 {
                        row[e] += dt / 6.0 * (r1[e] + 2.0 * (r2[e] + r3[e]) + r4[e]);
                    }
                }
                next
            }
        };
        for row in next.iter_mut() {
            if row.iter().any(|p| !p.is_finite()) {
                return Err(SolverError::NonFinite {
                    t: grid.node_time(i + 1),
                    context: "uncontrolled initialization sweep",
                });
            }
            renormalize_row(row).map_err(|_| SolverError::MassCollapse {
                t: grid.node_time(i + 1),
            })?;
        }
        out[(i + 1) * nb..(i + 2) * nb].copy_from_slice(&next);
    }
    Ok(out)
}

fn add_scaled_field(y: &[[f64; 4]], k: &[[f64; 4]], s: f64) -> Vec<[f64; 4]> {
    y.iter()
        .zip(k.iter())
        .map(|(row, krow)| {
            [
                row[0] + s * krow[0],
                row[1] + s * krow[1],
                row[2] + s * krow[2],
                row[3] + s * krow[3],
            ]
        })
        .collect()
}
