use super::VerifyError;
use crate::model::{GroupParams, Policy};
use crate::solver::{FlowGrid, TimeGrid};

/// Closed-form solution of the decoupled system (zero graphon, so all
/// aggregates vanish), evaluated exactly on the grid nodes.
///
/// With `z = 0` the distribution is pure exponential decay (`S` frozen,
/// `K -> R` at rate `mu_k`, `I -> R` at rate `mu_i`), the values in `S` and
/// `R` are identically zero, and `u(t, K)`, `u(t, I)` solve scalar linear
/// ODEs with piecewise-constant sources, integrated segment-exactly here.
/// Controls are `1` everywhere except `phi(t, I) = (lambda_i(t) + 1) / 2`.
///
/// Rejects nonzero relapse rates: no closed form is maintained for them.
pub fn analytic_decoupled(
    grid: &TimeGrid,
    params: &[GroupParams],
    policy: &Policy,
) -> Result<FlowGrid, VerifyError> {
    if let Some(k) = params.iter().position(|p| p.gamma != 0.0) {
        return Err(VerifyError::Precondition(format!(
            "block {k} has gamma = {}, the decoupled closed form requires gamma = 0",
            params[k].gamma
        )));
    }
    let nb = params.len();
    let n_nodes = grid.n_nodes();
    let mut flows = FlowGrid::zeros(n_nodes, nb);

    for (k, pk) in params.iter().enumerate() {
        // value in K: du/dt = mu_k u + lambda_k(t), u(T) = 0
        let u_k = backward_linear_exact(grid, pk.mu_k, 0.0, policy.lambda_k.breakpoints(), |t| {
            policy.lambda_k.value_at(t)
        });
        // value in I: du/dt = mu_i u - (lambda_i(t) - 1)^2 / 4, u(T) = c
        let u_i = backward_linear_exact(grid, pk.mu_i, pk.c, policy.lambda_i.breakpoints(), |t| {
            let d = policy.lambda_i.value_at(t) - 1.0;
            -0.25 * d * d
        });
        for node in 0..n_nodes {
            let t = grid.node_time(node);
            let idx = flows.idx(node, k);
            flows.p[idx] = [
                pk.p0[0],
                pk.p0[1] * (-pk.mu_k * t).exp(),
                pk.p0[2] * (-pk.mu_i * t).exp(),
                pk.p0[3]
                    + pk.p0[1] * (1.0 - (-pk.mu_k * t).exp())
                    + pk.p0[2] * (1.0 - (-pk.mu_i * t).exp()),
            ];
            flows.u[idx] = [0.0, u_k[node], u_i[node], 0.0];
            flows.phi[idx] = [1.0, 1.0, 0.5 * (policy.lambda_i.value_at(t) + 1.0), 1.0];
        }
    }
    Ok(flows)
}

/// Solves `du/dt = mu*u + s(t)`, `u(T) = terminal`, backward over the grid,
/// where `s` is constant between the given breakpoints. Each sub-segment
/// uses the exact solution `u(t) = (u(b) + s/mu) e^{mu (t-b)} - s/mu`, so
/// the only error is floating-point rounding.
fn backward_linear_exact(
    grid: &TimeGrid,
    mu: f64,
    terminal: f64,
    breakpoints: &[f64],
    source: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let t_end = grid.t_horizon();
    let mut out = vec![0.0; grid.n_nodes()];
    out[grid.n_steps()] = terminal;

    // interior breakpoints, descending
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| *b > 0.0 && *b < t_end)
        .collect();
    cuts.sort_by(|a, b| b.total_cmp(a));

    let mut anchor_t = t_end;
    let mut anchor_u = terminal;
    let mut cut_iter = cuts.into_iter().peekable();
    for node in (0..grid.n_steps()).rev() {
        let t = grid.node_time(node);
        while let Some(&b) = cut_iter.peek() {
            if b <= t {
                break;
            }
            anchor_u = step_exact(anchor_u, anchor_t, b, mu, &source);
            anchor_t = b;
            cut_iter.next();
        }
        anchor_u = step_exact(anchor_u, anchor_t, t, mu, &source);
        anchor_t = t;
        out[node] = anchor_u;
    }
    out
}

/// Exact backward step of `du/dt = mu*u + s` from `t_hi` to `t_lo` within
/// one constant-source segment.
fn step_exact(u_hi: f64, t_hi: f64, t_lo: f64, mu: f64, source: &impl Fn(f64) -> f64) -> f64 {
    if t_lo == t_hi {
        return u_hi;
    }
    let s = source(0.5 * (t_lo + t_hi));
    (u_hi + s / mu) * (mu * (t_lo - t_hi)).exp() - s / mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PiecewiseConstant;

    fn block(mu: f64, c: f64) -> GroupParams {
        GroupParams {
            beta_s: 0.4,
            beta_k: 0.5,
            beta_i: 0.75,
            mu_k: mu,
            mu_i: mu,
            gamma: 0.0,
            c,
            p0: [0.95, 0.02, 0.03, 0.0],
        }
    }

    #[test]
    fn s_and_r_values_vanish() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let flows =
            analytic_decoupled(&grid, &[block(0.1, 0.0)], &Policy::constant(1.0, 0.25)).unwrap();
        for node in 0..grid.n_nodes() {
            assert_eq!(flows.u[node][0], 0.0);
            assert_eq!(flows.u[node][3], 0.0);
        }
    }

    #[test]
    fn frozen_initial_value_in_i() {
        // lambda_i = 0.25, mu_i = 0.1, c = 0, T = 1
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let flows =
            analytic_decoupled(&grid, &[block(0.1, 0.0)], &Policy::constant(1.0, 0.25)).unwrap();
        assert!((flows.u[0][2] - 0.13382238088693192).abs() < 1e-15);
    }

    #[test]
    fn frozen_initial_value_in_k() {
        // lambda_k = 1.0, mu_k = 0.05, T = 1
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let flows =
            analytic_decoupled(&grid, &[block(0.05, 0.0)], &Policy::constant(1.0, 0.25)).unwrap();
        assert!((flows.u[0][1] - (-0.97541150998572)).abs() < 1e-12);
    }

    #[test]
    fn susceptible_mass_is_frozen() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let flows =
            analytic_decoupled(&grid, &[block(0.1, 0.0)], &Policy::constant(1.0, 0.25)).unwrap();
        for node in 0..grid.n_nodes() {
            assert_eq!(flows.p[node][0], 0.95);
            let total: f64 = flows.p[node].iter().sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn relapse_rate_rejected() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let mut b = block(0.1, 0.0);
        b.gamma = 0.1;
        assert!(analytic_decoupled(&grid, &[b], &Policy::constant(1.0, 0.25)).is_err());
    }

    #[test]
    fn piecewise_source_is_integrated_segment_exactly() {
        // lambda_k jumps at t = 0.5; compose the two closed-form segments by
        // hand and compare
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let policy = Policy {
            lambda_i: PiecewiseConstant::constant(0.25),
            lambda_k: PiecewiseConstant::new(vec![0.5], vec![1.0, 2.0]).unwrap(),
        };
        let mu = 0.1f64;
        let flows = analytic_decoupled(&grid, &[block(mu, 0.0)], &policy).unwrap();
        // segment [0.5, 1]: source 2.0, u(1) = 0
        let u_half = (2.0 / mu) * ((mu * (0.5 - 1.0)).exp() - 1.0);
        // segment [0, 0.5): source 1.0
        let expected0 = (u_half + 1.0 / mu) * (mu * (0.0 - 0.5)).exp() - 1.0 / mu;
        assert!((flows.u[0][1] - expected0).abs() < 1e-13);
        let mid = grid.n_steps() / 2;
        assert!((flows.u[mid][1] - u_half).abs() < 1e-13);
    }
}
