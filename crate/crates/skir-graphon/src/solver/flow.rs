use super::SolverError;
use crate::model::Aggregates;

/// Discretized trajectories of the coupled system: distribution `p`, value
/// function `u`, control `phi` (each `n_nodes x n_blocks x 4`), and the
/// per-block aggregates `z_k`, `z_i` (`n_nodes x n_blocks`).
///
/// Storage is node-major: the slice for one node holds all blocks
/// contiguously. The struct is plain data with value semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGrid {
    n_nodes: usize,
    n_blocks: usize,
    pub p: Vec<[f64; 4]>,
    pub u: Vec<[f64; 4]>,
    pub phi: Vec<[f64; 4]>,
    pub z_k: Vec<f64>,
    pub z_i: Vec<f64>,
}

impl FlowGrid {
    pub fn zeros(n_nodes: usize, n_blocks: usize) -> Self {
        let cells = n_nodes * n_blocks;
        FlowGrid {
            n_nodes,
            n_blocks,
            p: vec![[0.0; 4]; cells],
            u: vec![[0.0; 4]; cells],
            phi: vec![[0.0; 4]; cells],
            z_k: vec![0.0; cells],
            z_i: vec![0.0; cells],
        }
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Flat index of `(node, block)`.
    #[inline]
    pub fn idx(&self, node: usize, block: usize) -> usize {
        debug_assert!(node < self.n_nodes && block < self.n_blocks);
        node * self.n_blocks + block
    }

    pub fn same_shape(&self, other: &FlowGrid) -> bool {
        self.n_nodes == other.n_nodes && self.n_blocks == other.n_blocks
    }

    /// All blocks' distribution rows at one node.
    pub fn p_node(&self, node: usize) -> &[[f64; 4]] {
        &self.p[node * self.n_blocks..(node + 1) * self.n_blocks]
    }

    pub fn u_node(&self, node: usize) -> &[[f64; 4]] {
        &self.u[node * self.n_blocks..(node + 1) * self.n_blocks]
    }

    pub fn phi_node(&self, node: usize) -> &[[f64; 4]] {
        &self.phi[node * self.n_blocks..(node + 1) * self.n_blocks]
    }

    /// Aggregates felt by `block` at `node`.
    pub fn aggregates_at(&self, node: usize, block: usize) -> Aggregates {
        let i = self.idx(node, block);
        Aggregates::new(self.z_k[i], self.z_i[i])
    }
}

/// Supremum-norm distance between two flow grids, taken over all entries of
/// the `u` and `p` fields.
pub fn residual_norm(a: &FlowGrid, b: &FlowGrid) -> Result<f64, SolverError> {
    if !a.same_shape(b) {
        return Err(SolverError::ShapeMismatch(format!(
            "flow grids {}x{} vs {}x{}",
            a.n_nodes, a.n_blocks, b.n_nodes, b.n_blocks
        )));
    }
    Ok(sup_diff_rows(&a.u, &b.u).max(sup_diff_rows(&a.p, &b.p)))
}

/// Largest absolute entrywise difference between two row fields.
pub(crate) fn sup_diff_rows(a: &[[f64; 4]], b: &[[f64; 4]]) -> f64 {
    a.iter()
        .zip(b.iter())
        .flat_map(|(ra, rb)| ra.iter().zip(rb.iter()))
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_grids_have_zero_residual() {
        let mut a = FlowGrid::zeros(3, 2);
        a.u[2] = [1.0, -2.0, 3.0, 4.0];
        let b = a.clone();
        assert_eq!(residual_norm(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn single_perturbation_is_the_norm() {
        let a = FlowGrid::zeros(3, 2);
        let mut b = a.clone();
        b.p[4][2] += 1e-3;
        assert!((residual_norm(&a, &b).unwrap() - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn phi_and_z_do_not_enter_the_norm() {
        let a = FlowGrid::zeros(3, 2);
        let mut b = a.clone();
        b.phi[0][0] = 9.0;
        b.z_k[5] = 9.0;
        assert_eq!(residual_norm(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = FlowGrid::zeros(3, 2);
        let b = FlowGrid::zeros(4, 2);
        assert!(residual_norm(&a, &b).is_err());
    }

    fn arbitrary_grid(vals: Vec<f64>) -> FlowGrid {
        let mut g = FlowGrid::zeros(2, 2);
        for (i, v) in vals.into_iter().enumerate().take(16) {
            g.u[i / 4][i % 4] = v;
        }
        g
    }

    proptest! {
        #[test]
        fn triangle_inequality(
            xs in proptest::collection::vec(-1e3..1e3f64, 16),
            ys in proptest::collection::vec(-1e3..1e3f64, 16),
            zs in proptest::collection::vec(-1e3..1e3f64, 16),
        ) {
            let a = arbitrary_grid(xs);
            let b = arbitrary_grid(ys);
            let c = arbitrary_grid(zs);
            let ab = residual_norm(&a, &b).unwrap();
            let bc = residual_norm(&b, &c).unwrap();
            let ac = residual_norm(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
