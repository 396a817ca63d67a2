use super::ModelError;

/// A piecewise-constant function of time.
///
/// `values` has one entry more than `breakpoints`: the function equals
/// `values[j]` on `[breakpoints[j-1], breakpoints[j])` with the outer
/// segments extending to `-inf` and `+inf`. Breakpoints must be strictly
/// increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    /// A function constant in time.
    pub fn constant(value: f64) -> Self {
        PiecewiseConstant {
            breakpoints: Vec::new(),
            values: vec![value],
        }
    }

    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != breakpoints.len() + 1 {
            return Err(ModelError::invalid(
                "piecewise values",
                format!(
                    "{} values for {} breakpoints (need breakpoints + 1)",
                    values.len(),
                    breakpoints.len()
                ),
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("piecewise function"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::invalid(
                "breakpoints",
                "not strictly increasing",
            ));
        }
        Ok(PiecewiseConstant {
            breakpoints,
            values,
        })
    }

    /// Value at time `t`.
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        let seg = self.breakpoints.partition_point(|b| *b <= t);
        self.values[seg]
    }

    /// Supremum of `|value|` over all segments.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest segment value.
    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn is_constant(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Returns a copy with every breakpoint snapped to the nearest multiple
    /// of `dt`. Segments that collapse to zero width are merged (the later
    /// value wins on the shared node).
    pub fn snapped_to_grid(&self, dt: f64) -> Self {
        if self.breakpoints.is_empty() {
            return self.clone();
        }
        let mut breakpoints = Vec::with_capacity(self.breakpoints.len());
        let mut values = vec![self.values[0]];
        for (b, v) in self.breakpoints.iter().zip(&self.values[1..]) {
            let snapped = (b / dt).round() * dt;
            if breakpoints.last() == Some(&snapped) {
                *values.last_mut().unwrap() = *v;
            } else {
                breakpoints.push(snapped);
                values.push(*v);
            }
        }
        PiecewiseConstant {
            breakpoints,
            values,
        }
    }
}

/// Regulator policy: the rumor-rate threshold `lambda_i` penalizing
/// communication in state `I`, and the truth reward `lambda_k` paid in
/// state `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub lambda_i: PiecewiseConstant,
    pub lambda_k: PiecewiseConstant,
}

impl Policy {
    /// Policy with time-constant coefficients.
    pub fn constant(lambda_k: f64, lambda_i: f64) -> Self {
        Policy {
            lambda_i: PiecewiseConstant::constant(lambda_i),
            lambda_k: PiecewiseConstant::constant(lambda_k),
        }
    }

    /// The reward must be nonnegative; both coefficients finite.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.lambda_k.min_value() < 0.0 {
            return Err(ModelError::invalid(
                "lambda_k",
                format!("negative reward {}", self.lambda_k.min_value()),
            ));
        }
        Ok(())
    }

    /// Supremum bound on `|lambda_i|` over the horizon.
    pub fn lambda_i_bound(&self) -> f64 {
        self.lambda_i.sup_abs()
    }

    /// Supremum bound on `|lambda_k|` over the horizon.
    pub fn lambda_k_bound(&self) -> f64 {
        self.lambda_k.sup_abs()
    }
}
