use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rhs::{hjb_rhs_block, kfp_rhs_block, renormalize_row};
use super::{SolverError, TimeGrid};
use crate::model::{self, Aggregates, ControlBound, GroupParams, Policy, StateId};

/// Time-stepping scheme for both the forward and backward sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

#[inline]
fn add_scaled(y: [f64; 4], k: [f64; 4], s: f64) -> [f64; 4] {
    [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2], y[3] + s * k[3]]
}

/// One classical Runge-Kutta step of size `h`. The right-hand side is
/// called with the position `w` within the step (0 at the start, 1 at the
/// target node) so callers can interpolate node data linearly in time.
#[inline]
pub(crate) fn rk4_step(
    y: [f64; 4],
    h: f64,
    mut rhs: impl FnMut(f64, [f64; 4]) -> [f64; 4],
) -> [f64; 4] {
    let k1 = rhs(0.0, y);
    let k2 = rhs(0.5, add_scaled(y, k1, 0.5 * h));
    let k3 = rhs(0.5, add_scaled(y, k2, 0.5 * h));
    let k4 = rhs(1.0, add_scaled(y, k3, h));
    let mut out = y;
    for e in 0..4 {
        out[e] += h / 6.0 * (k1[e] + 2.0 * (k2[e] + k3[e]) + k4[e]);
    }
    out
}

/// One explicit Euler step of size `h`.
#[inline]
pub(crate) fn euler_step(
    y: [f64; 4],
    h: f64,
    mut rhs: impl FnMut(f64, [f64; 4]) -> [f64; 4],
) -> [f64; 4] {
    add_scaled(y, rhs(0.0, y), h)
}

#[inline]
fn lerp_row(a: [f64; 4], b: [f64; 4], w: f64) -> [f64; 4] {
    [
        a[0] + w * (b[0] - a[0]),
        a[1] + w * (b[1] - a[1]),
        a[2] + w * (b[2] - a[2]),
        a[3] + w * (b[3] - a[3]),
    ]
}

#[inline]
fn lerp_agg(a: Aggregates, b: Aggregates, w: f64) -> Aggregates {
    Aggregates::new(a.z_k + w * (b.z_k - a.z_k), a.z_i + w * (b.z_i - a.z_i))
}

fn check_shapes(
    grid: &TimeGrid,
    n_blocks: usize,
    field_len: usize,
    what: &str,
) -> Result<(), SolverError> {
    let expect = grid.n_nodes() * n_blocks;
    if field_len != expect {
        return Err(SolverError::ShapeMismatch(format!(
            "{what}: {field_len} entries, expected {} nodes x {n_blocks} blocks = {expect}",
            grid.n_nodes()
        )));
    }
    Ok(())
}

/// Integrates the distribution of every block forward from its initial
/// condition, given the control and aggregate fields on all nodes. Blocks
/// decouple once the aggregates are fixed, so they integrate in parallel;
/// each block's arithmetic is independent of the parallelism degree.
///
/// Rows are clipped and renormalized when a step drifts off the simplex by
/// more than 1e-12; corrections above 1e-9 are logged as warnings since
/// they indicate the step size does not resolve the dynamics.
pub fn integrate_kfp_forward(
    grid: &TimeGrid,
    params: &[GroupParams],
    phi: &[[f64; 4]],
    z_k: &[f64],
    z_i: &[f64],
    integrator: Integrator,
) -> Result<Vec<[f64; 4]>, SolverError> {
    let nb = params.len();
    check_shapes(grid, nb, phi.len(), "control field")?;
    check_shapes(grid, nb, z_k.len(), "z_k field")?;
    check_shapes(grid, nb, z_i.len(), "z_i field")?;

    let per_block: Vec<(Vec<[f64; 4]>, f64)> = (0..nb)
        .into_par_iter()
        .map(|k| integrate_block_forward(grid, &params[k], k, nb, phi, z_k, z_i, integrator))
        .collect::<Result<_, _>>()?;

    let worst = per_block.iter().fold(0.0f64, |m, (_, c)| m.max(*c));
    if worst > 1e-9 {
        log::warn!("forward sweep renormalized probabilities (max correction {worst:.3e})");
    }

    let n_nodes = grid.n_nodes();
    let mut out = vec![[0.0; 4]; n_nodes * nb];
    for (k, (traj, _)) in per_block.iter().enumerate() {
        for node in 0..n_nodes {
            out[node * nb + k] = traj[node];
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn integrate_block_forward(
    grid: &TimeGrid,
    params: &GroupParams,
    block: usize,
    nb: usize,
    phi: &[[f64; 4]],
    z_k: &[f64],
    z_i: &[f64],
    integrator: Integrator,
) -> Result<(Vec<[f64; 4]>, f64), SolverError> {
    let n_steps = grid.n_steps();
    let dt = grid.dt();
    let mut traj = vec![[0.0; 4]; n_steps + 1];
    traj[0] = params.p0;
    let mut max_correction = 0.0f64;

    for i in 0..n_steps {
        let lo = i * nb + block;
        let hi = (i + 1) * nb + block;
        let t_lo = grid.node_time(i);
        let phi_lo = phi[lo];
        let phi_hi = phi[hi];
        let z_lo = Aggregates::new(z_k[lo], z_i[lo]);
        let z_hi = Aggregates::new(z_k[hi], z_i[hi]);
        let rhs = |w: f64, y: [f64; 4]| {
            kfp_rhs_block(y, lerp_row(phi_lo, phi_hi, w), lerp_agg(z_lo, z_hi, w), params)
        };
        let mut next = match integrator {
            Integrator::Rk4 => rk4_step(traj[i], dt, rhs),
            Integrator::Euler => euler_step(traj[i], dt, rhs),
        };
        if next.iter().any(|p| !p.is_finite()) {
            return Err(SolverError::NonFinite {
                t: t_lo + dt,
                context: "forward distribution sweep",
            });
        }
        match renormalize_row(&mut next) {
            Ok(c) => max_correction = max_correction.max(c),
            Err(_) => {
                return Err(SolverError::MassCollapse { t: t_lo + dt });
            }
        }
        traj[i + 1] = next;
    }
    Ok((traj, max_correction))
}

/// Integrates every block's value function backward from its terminal
/// condition (`u(T, I) = c`, zero elsewhere), given the aggregate fields on
/// all nodes. Returns the value field and the minimizing control recorded
/// at every node, already projected onto `[0, a_max]`.
pub fn integrate_hjb_backward(
    grid: &TimeGrid,
    params: &[GroupParams],
    policy: &Policy,
    bound: &ControlBound,
    z_k: &[f64],
    z_i: &[f64],
    integrator: Integrator,
) -> Result<(Vec<[f64; 4]>, Vec<[f64; 4]>), SolverError> {
    let nb = params.len();
    check_shapes(grid, nb, z_k.len(), "z_k field")?;
    check_shapes(grid, nb, z_i.len(), "z_i field")?;

    let per_block: Vec<(Vec<[f64; 4]>, Vec<[f64; 4]>)> = (0..nb)
        .into_par_iter()
        .map(|k| integrate_block_backward(grid, &params[k], k, nb, policy, bound, z_k, z_i, integrator))
        .collect::<Result<_, _>>()?;

    let n_nodes = grid.n_nodes();
    let mut u = vec![[0.0; 4]; n_nodes * nb];
    let mut phi = vec![[0.0; 4]; n_nodes * nb];
    for (k, (u_traj, phi_traj)) in per_block.iter().enumerate() {
        for node in 0..n_nodes {
            u[node * nb + k] = u_traj[node];
            phi[node * nb + k] = phi_traj[node];
        }
    }
    Ok((u, phi))
}

#[allow(clippy::too_many_arguments)]
fn integrate_block_backward(
    grid: &TimeGrid,
    params: &GroupParams,
    block: usize,
    nb: usize,
    policy: &Policy,
    bound: &ControlBound,
    z_k: &[f64],
    z_i: &[f64],
    integrator: Integrator,
) -> Result<(Vec<[f64; 4]>, Vec<[f64; 4]>), SolverError> {
    let n_steps = grid.n_steps();
    let dt = grid.dt();
    let mut u = vec![[0.0; 4]; n_steps + 1];
    let mut phi = vec![[0.0; 4]; n_steps + 1];
    u[n_steps] = [0.0, 0.0, params.c, 0.0];

    let control_at = |t: f64, z: Aggregates, u_row: [f64; 4]| -> [f64; 4] {
        [
            bound.clip(model::optimal_control_raw(t, StateId::S, z, u_row, params, policy)),
            bound.clip(model::optimal_control_raw(t, StateId::K, z, u_row, params, policy)),
            bound.clip(model::optimal_control_raw(t, StateId::I, z, u_row, params, policy)),
            1.0,
        ]
    };

    let z_at = |node: usize| Aggregates::new(z_k[node * nb + block], z_i[node * nb + block]);
    phi[n_steps] = control_at(grid.t_horizon(), z_at(n_steps), u[n_steps]);

    for i in (0..n_steps).rev() {
        let t_hi = grid.node_time(i + 1);
        let z_hi = z_at(i + 1);
        let z_lo = z_at(i);
        let rhs = |w: f64, y: [f64; 4]| {
            hjb_rhs_block(y, lerp_agg(z_hi, z_lo, w), t_hi - w * dt, params, policy, bound).0
        };
        let next = match integrator {
            Integrator::Rk4 => rk4_step(u[i + 1], -dt, rhs),
            Integrator::Euler => euler_step(u[i + 1], -dt, rhs),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite {
                t: grid.node_time(i),
                context: "backward value sweep",
            });
        }
        u[i] = next;
        phi[i] = control_at(grid.node_time(i), z_lo, u[i]);
    }
    Ok((u, phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_params(mu: f64) -> GroupParams {
        GroupParams {
            beta_s: 0.4,
            beta_k: 0.5,
            beta_i: 0.75,
            mu_k: mu,
            mu_i: mu,
            gamma: 0.0,
            c: 0.0,
            p0: [0.95, 0.02, 0.03, 0.0],
        }
    }

    fn zero_fields(grid: &TimeGrid, nb: usize) -> (Vec<[f64; 4]>, Vec<f64>, Vec<f64>) {
        let cells = grid.n_nodes() * nb;
        (vec![[1.0; 4]; cells], vec![0.0; cells], vec![0.0; cells])
    }

    #[test]
    fn decoupled_forward_matches_exponential_decay() {
        // z = 0: p(t, K) = p0(K) * exp(-mu_k t); frozen value 0.02*e^{-0.1}
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let params = [decay_params(0.1)];
        let (phi, z_k, z_i) = zero_fields(&grid, 1);
        let p = integrate_kfp_forward(&grid, &params, &phi, &z_k, &z_i, Integrator::Rk4).unwrap();
        let p_end = p[grid.n_steps()];
        assert!((p_end[1] - 0.018096748360719190).abs() < 1e-8);
        assert!((p_end[2] - 0.03 * (-0.1f64).exp()).abs() < 1e-8);
        assert_eq!(p_end[0], 0.95);
        assert_eq!(p[0], params[0].p0);
    }

    #[test]
    fn absorbing_r_state_is_stationary() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let mut params = decay_params(0.1);
        params.p0 = [0.0, 0.0, 0.0, 1.0];
        let (phi, z_k, z_i) = zero_fields(&grid, 1);
        let p = integrate_kfp_forward(&grid, &[params], &phi, &z_k, &z_i, Integrator::Rk4).unwrap();
        for node in 0..grid.n_nodes() {
            assert_eq!(p[node], [0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn rk4_halving_dt_shrinks_error_sixteenfold() {
        // stiff-ish decay so truncation error sits well above rounding
        let params = [decay_params(2.0)];
        let mut errors = Vec::new();
        for n_steps in [10usize, 20, 40] {
            let grid = TimeGrid::new(1.0, n_steps).unwrap();
            let (phi, z_k, z_i) = zero_fields(&grid, 1);
            let p =
                integrate_kfp_forward(&grid, &params, &phi, &z_k, &z_i, Integrator::Rk4).unwrap();
            let mut err = 0.0f64;
            for node in 0..grid.n_nodes() {
                let t = grid.node_time(node);
                err = err.max((p[node][1] - 0.02 * (-2.0 * t).exp()).abs());
                err = err.max((p[node][2] - 0.03 * (-2.0 * t).exp()).abs());
            }
            errors.push(err);
        }
        let order1 = (errors[0] / errors[1]).log2();
        let order2 = (errors[1] / errors[2]).log2();
        assert!(order1 > 3.8, "observed order {order1}");
        assert!(order2 > 3.8, "observed order {order2}");
    }

    #[test]
    fn euler_is_first_order() {
        let params = [decay_params(2.0)];
        let mut errors = Vec::new();
        for n_steps in [100usize, 200] {
            let grid = TimeGrid::new(1.0, n_steps).unwrap();
            let (phi, z_k, z_i) = zero_fields(&grid, 1);
            let p = integrate_kfp_forward(&grid, &params, &phi, &z_k, &z_i, Integrator::Euler)
                .unwrap();
            let mut err = 0.0f64;
            for node in 0..grid.n_nodes() {
                let t = grid.node_time(node);
                err = err.max((p[node][1] - 0.02 * (-2.0 * t).exp()).abs());
            }
            errors.push(err);
        }
        let order = (errors[0] / errors[1]).log2();
        assert!(order > 0.9 && order < 1.5, "observed order {order}");
    }

    #[test]
    fn backward_value_matches_scalar_ode() {
        // z = 0, constant reward: u(t,K) = (lambda_k/mu_k)(e^{mu_k(t-T)} - 1)
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let params = [GroupParams {
            mu_k: 0.05,
            mu_i: 0.05,
            ..decay_params(0.1)
        }];
        let policy = Policy::constant(1.0, 0.25);
        let (_, z_k, z_i) = zero_fields(&grid, 1);
        let (u, phi) = integrate_hjb_backward(
            &grid,
            &params,
            &policy,
            &ControlBound::default(),
            &z_k,
            &z_i,
            Integrator::Rk4,
        )
        .unwrap();
        assert!((u[0][1] - (-0.97541150998572)).abs() < 1e-8);
        // terminal data pinned exactly
        assert_eq!(u[grid.n_steps()], [0.0, 0.0, 0.0, 0.0]);
        // decoupled control in I: (0.25 + 1)/2
        assert!((phi[0][2] - 0.625).abs() < 1e-12);
        assert_eq!(phi[0][3], 1.0);
    }

    #[test]
    fn matching_rumor_threshold_keeps_value_at_zero() {
        // c = 0 and lambda_i = 1: both squared residuals vanish at phi = 1
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let params = [decay_params(0.1)];
        let policy = Policy::constant(1.0, 1.0);
        let (_, z_k, z_i) = zero_fields(&grid, 1);
        let (u, phi) = integrate_hjb_backward(
            &grid,
            &params,
            &policy,
            &ControlBound::default(),
            &z_k,
            &z_i,
            Integrator::Rk4,
        )
        .unwrap();
        for node in 0..grid.n_nodes() {
            assert!(u[node][2].abs() < 1e-13);
            assert!((phi[node][2] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn terminal_penalty_is_pinned() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let params = [GroupParams {
            c: 2.5,
            ..decay_params(0.1)
        }];
        let policy = Policy::constant(1.0, 0.25);
        let (_, z_k, z_i) = zero_fields(&grid, 1);
        let (u, _) = integrate_hjb_backward(
            &grid,
            &params,
            &policy,
            &ControlBound::default(),
            &z_k,
            &z_i,
            Integrator::Rk4,
        )
        .unwrap();
        assert_eq!(u[grid.n_steps()], [0.0, 0.0, 2.5, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let params = [decay_params(0.1)];
        let err = integrate_kfp_forward(
            &grid,
            &params,
            &vec![[1.0; 4]; 5],
            &vec![0.0; 11],
            &vec![0.0; 11],
            Integrator::Rk4,
        );
        assert!(matches!(err, Err(SolverError::ShapeMismatch(_))));
    }
}
