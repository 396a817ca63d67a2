use super::{ModelError, MASS_SUM_TOL};

/// A piecewise-constant graphon: a symmetric matrix of connection strengths
/// between blocks, plus the width (mass) of each block on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGraphon {
    weights: Vec<f64>,
    masses: Vec<f64>,
    n_blocks: usize,
}

impl BlockGraphon {
    /// Builds a graphon from weight rows and block masses, checking symmetry,
    /// the `[0, 1]` range of weights, and that masses are nonnegative and
    /// sum to one.
    pub fn from_rows(rows: &[Vec<f64>], masses: Vec<f64>) -> Result<Self, ModelError> {
        let n = masses.len();
        if n == 0 {
            return Err(ModelError::invalid("masses", "no blocks"));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(ModelError::invalid(
                "weights",
                format!("need a {n}x{n} matrix to match {n} masses"),
            ));
        }
        let mut weights = Vec::with_capacity(n * n);
        for row in rows {
            weights.extend_from_slice(row);
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || !(0.0..=1.0).contains(w) {
                return Err(ModelError::invalid(
                    "weights",
                    format!("entry ({},{}) = {w} outside [0,1]", i / n, i % n),
                ));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if weights[i * n + j] != weights[j * n + i] {
                    return Err(ModelError::invalid(
                        "weights",
                        format!("asymmetric at ({i},{j})"),
                    ));
                }
            }
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(ModelError::invalid("masses", "negative or non-finite mass"));
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > MASS_SUM_TOL {
            return Err(ModelError::invalid(
                "masses",
                format!("sum to {sum}, not 1"),
            ));
        }
        Ok(BlockGraphon {
            weights,
            masses,
            n_blocks: n,
        })
    }

    /// The zero graphon on `n` equal-mass blocks (no interactions).
    pub fn zero(n: usize) -> Self {
        BlockGraphon {
            weights: vec![0.0; n * n],
            masses: vec![1.0 / n as f64; n],
            n_blocks: n,
        }
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Connection strength between blocks `i` and `j`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_blocks + j]
    }

    /// Mass of block `k`.
    #[inline]
    pub fn mass(&self, k: usize) -> f64 {
        self.masses[k]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Row of connection strengths for block `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_blocks..(i + 1) * self.n_blocks]
    }
}
