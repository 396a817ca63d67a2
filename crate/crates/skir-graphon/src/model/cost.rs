use super::{GroupParams, Policy, StateId};

/// Running cost of playing rate `alpha` in state `e` at time `t`:
/// a rumor penalty `(lambda_i(t) - alpha)^2 / 2` in state `I`, a truth
/// reward `-lambda_k(t)` in state `K`, and the effort cost
/// `(1 - alpha)^2 / 2` of deviating from the natural rate everywhere.
#[inline]
pub fn running_cost(t: f64, e: StateId, alpha: f64, policy: &Policy) -> f64 {
    let effort = 1.0 - alpha;
    let mut cost = 0.5 * effort * effort;
    match e {
        StateId::I => {
            let gap = policy.lambda_i.value_at(t) - alpha;
            cost += 0.5 * gap * gap;
        }
        StateId::K => {
            cost -= policy.lambda_k.value_at(t);
        }
        _ => {}
    }
    cost
}

/// Terminal penalty: `c` for ending in state `I`, zero otherwise.
#[inline]
pub fn terminal_cost(e: StateId, params: &GroupParams) -> f64 {
    if e == StateId::I {
        params.c
    } else {
        0.0
    }
}
