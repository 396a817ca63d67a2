use super::{ModelError, StateId, MASS_SUM_TOL};

/// Per-block model coefficients of the SKIR dynamics and cost.
///
/// `beta_*` are the meeting intensities felt while in states `S`, `K`, `I`;
/// `mu_k`, `mu_i` the forgetting rates out of `K` and `I`; `gamma` an
/// optional relapse rate from `R` back to `S`; `c` the terminal penalty for
/// ending in `I`; `p0` the initial state distribution of the block.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupParams {
    pub beta_s: f64,
    pub beta_k: f64,
    pub beta_i: f64,
    pub mu_k: f64,
    pub mu_i: f64,
    pub gamma: f64,
    pub c: f64,
    pub p0: [f64; 4],
}

impl GroupParams {
    /// Checks all field invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), ModelError> {
        let rates = [
            ("beta_s", self.beta_s),
            ("beta_k", self.beta_k),
            ("beta_i", self.beta_i),
            ("gamma", self.gamma),
            ("c", self.c),
        ];
        for (name, v) in rates {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
            if v < 0.0 {
                return Err(ModelError::invalid(name, format!("{v} is negative")));
            }
        }
        for (name, v) in [("mu_k", self.mu_k), ("mu_i", self.mu_i)] {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
            if v <= 0.0 {
                return Err(ModelError::invalid(name, format!("{v} is not positive")));
            }
        }
        let sum: f64 = self.p0.iter().sum();
        if self.p0.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::NonFinite("p0"));
        }
        if (sum - 1.0).abs() > MASS_SUM_TOL {
            return Err(ModelError::invalid("p0", format!("sums to {sum}, not 1")));
        }
        if let Some(p) = self.p0.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ModelError::invalid("p0", format!("entry {p} outside [0,1]")));
        }
        Ok(())
    }

    /// Meeting intensity felt while in state `e` (zero for `R`).
    #[inline]
    pub fn beta(&self, e: StateId) -> f64 {
        match e {
            StateId::S => self.beta_s,
            StateId::K => self.beta_k,
            StateId::I => self.beta_i,
            StateId::R => 0.0,
        }
    }

    /// Largest meeting intensity of this block.
    pub fn max_beta(&self) -> f64 {
        self.beta_s.max(self.beta_k).max(self.beta_i)
    }
}

/// Admissible communication rates: the interval `[0, a_max]`.
///
/// `a_max` must exceed the natural rate 1 so the uncontrolled behaviour is
/// admissible with slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBound {
    pub a_max: f64,
}

impl ControlBound {
    pub const fn new(a_max: f64) -> Self {
        ControlBound { a_max }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.a_max.is_finite() {
            return Err(ModelError::NonFinite("a_max"));
        }
        if self.a_max <= 1.0 {
            return Err(ModelError::invalid(
                "a_max",
                format!("{} must exceed the natural rate 1", self.a_max),
            ));
        }
        Ok(())
    }

    /// Projects a raw rate onto the admissible interval.
    #[inline]
    pub fn clip(&self, alpha: f64) -> f64 {
        alpha.clamp(0.0, self.a_max)
    }

    /// Whether `alpha` is admissible.
    #[inline]
    pub fn contains(&self, alpha: f64) -> bool {
        alpha.is_finite() && (0.0..=self.a_max).contains(&alpha)
    }
}

impl Default for ControlBound {
    fn default() -> Self {
        ControlBound { a_max: 5.0 }
    }
}

/// Graphon-weighted communication mass of the population in states `K`
/// and `I`, as felt by one block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Aggregates {
    pub z_k: f64,
    pub z_i: f64,
}

impl Aggregates {
    pub const ZERO: Aggregates = Aggregates { z_k: 0.0, z_i: 0.0 };

    pub const fn new(z_k: f64, z_i: f64) -> Self {
        Aggregates { z_k, z_i }
    }

    /// Aggregates are weighted averages of nonnegative quantities.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.z_k.is_finite() || !self.z_i.is_finite() {
            return Err(ModelError::NonFinite("aggregates"));
        }
        if self.z_k < 0.0 || self.z_i < 0.0 {
            return Err(ModelError::invalid(
                "aggregates",
                format!("negative mass (z_k={}, z_i={})", self.z_k, self.z_i),
            ));
        }
        Ok(())
    }
}
