use super::{Aggregates, ControlBound, GroupParams, ModelError, StateId};

/// Transition-rate matrix over the SKIR states, indexed `[from][to]`.
pub type QMatrix = [[f64; 4]; 4];

/// Builds the transition-rate matrix for one agent playing rate `alpha`
/// against aggregates `z`.
///
/// Off-diagonal rates: `S->K = beta_s*alpha*z_k`, `S->I = beta_s*alpha*z_i`,
/// `K->I = beta_k*alpha*z_i`, `K->R = mu_k`, `I->K = beta_i*alpha*z_k`,
/// `I->R = mu_i`, `R->S = gamma`. Each diagonal entry is the negated sum of
/// its row's off-diagonals, so rows sum to zero exactly.
pub fn q_matrix(
    params: &GroupParams,
    alpha: f64,
    z: Aggregates,
    bound: &ControlBound,
) -> Result<QMatrix, ModelError> {
    if !alpha.is_finite() {
        return Err(ModelError::NonFinite("alpha"));
    }
    if alpha < 0.0 || alpha > bound.a_max {
        return Err(ModelError::ControlOutOfBounds {
            alpha,
            a_max: bound.a_max,
        });
    }
    z.validate()?;
    Ok(q_matrix_unchecked(params, alpha, z))
}

pub(crate) fn q_matrix_unchecked(params: &GroupParams, alpha: f64, z: Aggregates) -> QMatrix {
    [
        q_row(params, StateId::S, alpha, z),
        q_row(params, StateId::K, alpha, z),
        q_row(params, StateId::I, alpha, z),
        q_row(params, StateId::R, alpha, z),
    ]
}

/// Single row of the rate matrix: all jump rates out of state `e` at rate
/// `alpha`, with the diagonal set to the negated row sum.
#[inline]
pub(crate) fn q_row(params: &GroupParams, e: StateId, alpha: f64, z: Aggregates) -> [f64; 4] {
    let mut row = [0.0; 4];
    match e {
        StateId::S => {
            row[StateId::K.index()] = params.beta_s * alpha * z.z_k;
            row[StateId::I.index()] = params.beta_s * alpha * z.z_i;
        }
        StateId::K => {
            row[StateId::I.index()] = params.beta_k * alpha * z.z_i;
            row[StateId::R.index()] = params.mu_k;
        }
        StateId::I => {
            row[StateId::K.index()] = params.beta_i * alpha * z.z_k;
            row[StateId::R.index()] = params.mu_i;
        }
        StateId::R => {
            row[StateId::S.index()] = params.gamma;
        }
    }
    row[e.index()] = -(row[0] + row[1] + row[2] + row[3]);
    row
}

/// Generator used by the forward equation: row `e` is evaluated at that
/// state's own control `phi_row[e]`, since the rate of leaving a state is
/// chosen by the agents currently in it.
pub(crate) fn generator(params: &GroupParams, phi_row: [f64; 4], z: Aggregates) -> QMatrix {
    [
        q_row(params, StateId::S, phi_row[0], z),
        q_row(params, StateId::K, phi_row[1], z),
        q_row(params, StateId::I, phi_row[2], z),
        q_row(params, StateId::R, phi_row[3], z),
    ]
}
