use super::SolverError;

/// Uniform discretization of the horizon `[0, T]` into `n_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_horizon: f64, n_steps: usize) -> Result<Self, SolverError> {
        if !t_horizon.is_finite() || t_horizon <= 0.0 {
            return Err(SolverError::InvalidGrid(format!(
                "horizon {t_horizon} must be positive and finite"
            )));
        }
        if n_steps < 2 {
            return Err(SolverError::InvalidGrid(format!(
                "n_steps = {n_steps}, need at least 2"
            )));
        }
        Ok(TimeGrid { t_horizon, n_steps })
    }

    #[inline]
    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid nodes, `n_steps + 1`.
    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_horizon / self.n_steps as f64
    }

    /// Time of node `i`.
    #[inline]
    pub fn node_time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_horizon
        } else {
            i as f64 * self.dt()
        }
    }

    /// Step index and in-step fraction for a time, clamped to the grid.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let x = (t / self.dt()).clamp(0.0, self.n_steps as f64);
        let mut i = x.floor() as usize;
        if i >= self.n_steps {
            i = self.n_steps - 1;
        }
        (i, x - i as f64)
    }
}
