//! Discrete calculus on graphs: gradient, divergence, Laplacian, inner
//! products, norms, means and the energies used by the variational solvers.
//!
//! Conventions: functions u: X -> R^k are stored as n-by-k row-major arrays;
//! `grad u(x_i, x_j) = u(x_j) - u(x_i)`; `div V(x_i) = sum_j w_ij V(x_i, x_j)`;
//! `L u = -div(grad u)`; `|.|` on R^k is the Euclidean norm. Summations run in
//! ascending node/neighbor order so results are reproducible bit-for-bit.

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::labels::LabelSet;
use ndarray::parallel::prelude::*;
use ndarray::{Array1, Array2, Axis};
use rayon::prelude::ParallelSliceMut;

/// A function u: X -> R^k as an n-by-k array; the universal solver state.
pub type NodeMatrix = Array2<f64>;

/// An antisymmetric function on the graph's edges, V(i, j) = -V(j, i).
///
/// Values are stored only for edges with i < j; the opposite orientation is
/// materialized as the negation, so antisymmetry holds structurally.
#[derive(Debug, Clone)]
pub struct EdgeField {
    values: Array2<f64>,
}

impl EdgeField {
    pub fn zeros(graph: &SparseGraph, k: usize) -> Self {
        Self {
            values: Array2::zeros((graph.edge_count(), k)),
        }
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    /// Stored values, one row per undirected edge (i < j) in the graph's
    /// edge-id order.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    /// V(i, j) for a stored edge, with the sign implied by the orientation.
    /// Returns None when (i, j) is not an edge. Self loops give zero.
    pub fn get(&self, graph: &SparseGraph, i: usize, j: usize) -> Option<Array1<f64>> {
        if i == j {
            return graph.weight(i, i).map(|_| Array1::zeros(self.channels()));
        }
        graph.weight(i, j)?;
        let (a, b) = (i.min(j), i.max(j));
        let eid = (0..graph.edge_count())
            .find(|&e| graph.edge_endpoints(e) == (a, b))?;
        let row = self.values.row(eid).to_owned();
        Some(if i < j { row } else { -row })
    }

    fn check(&self, graph: &SparseGraph) -> Result<()> {
        if self.values.nrows() != graph.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.edge_count(),
                got: self.values.nrows(),
            });
        }
        Ok(())
    }
}

fn check_node_matrix(graph: &SparseGraph, u: &NodeMatrix) -> Result<()> {
    if u.nrows() != graph.node_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.node_count(),
            got: u.nrows(),
        });
    }
    Ok(())
}

/// grad u(x_i, x_j) = u(x_j) - u(x_i) on every edge.
pub fn gradient(graph: &SparseGraph, u: &NodeMatrix) -> Result<EdgeField> {
    check_node_matrix(graph, u)?;
    let k = u.ncols();
    let mut field = EdgeField::zeros(graph, k);
    field
        .values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(e, mut row)| {
            let (i, j) = graph.edge_endpoints(e);
            for c in 0..k {
                row[c] = u[[j, c]] - u[[i, c]];
            }
        });
    Ok(field)
}

/// div V(x_i) = sum_j w_ij V(x_i, x_j), componentwise.
pub fn divergence(graph: &SparseGraph, field: &EdgeField) -> Result<NodeMatrix> {
    field.check(graph)?;
    let n = graph.node_count();
    let k = field.channels();
    let vals = &field.values;
    let mut out = Array2::zeros((n, k));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for (j, w, eid) in graph.row_with_edges(i) {
                if j == i {
                    continue; // V(i, i) = 0 by antisymmetry
                }
                let sign = if i < j { w } else { -w };
                let v = vals.row(eid);
                for c in 0..k {
                    row[c] += sign * v[c];
                }
            }
        });
    Ok(out)
}

/// L u(x_i) = sum_j w_ij (u(x_i) - u(x_j)) = (D - W) u; equals -div(grad u).
pub fn laplacian_apply(graph: &SparseGraph, u: &NodeMatrix) -> Result<NodeMatrix> {
    check_node_matrix(graph, u)?;
    let n = graph.node_count();
    let k = u.ncols();
    let u_std = u.as_standard_layout();
    let us = u_std.as_slice().expect("standard layout");
    let degrees = graph.degrees();
    let mut out = Array2::zeros((n, k));
    out.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(i, row)| {
            let ui = &us[i * k..(i + 1) * k];
            for c in 0..k {
                row[c] = degrees[i] * ui[c];
            }
            for (j, w) in graph.row(i) {
                let uj = &us[j * k..(j + 1) * k];
                for c in 0..k {
                    row[c] -= w * uj[c];
                }
            }
        });
    Ok(out)
}

/// Inner product (V, W) over edges: (1/2) sum_ij w_ij V(i,j) . W(i,j).
pub fn edge_inner(graph: &SparseGraph, a: &EdgeField, b: &EdgeField) -> Result<f64> {
    a.check(graph)?;
    b.check(graph)?;
    if a.channels() != b.channels() {
        return Err(Error::DimensionMismatch {
            expected: a.channels(),
            got: b.channels(),
        });
    }
    // Both orientations contribute equally, cancelling the 1/2.
    let mut acc = 0.0;
    for e in 0..graph.edge_count() {
        let w = graph.edge_weight(e);
        let dot: f64 = a
            .values
            .row(e)
            .iter()
            .zip(b.values.row(e).iter())
            .map(|(x, y)| x * y)
            .sum();
        acc += w * dot;
    }
    Ok(acc)
}

/// sum over edges of w_ij |V(i,j)|^p, i.e. the p-th power of the edge norm.
fn edge_norm_pow(graph: &SparseGraph, field: &EdgeField, p: f64) -> f64 {
    let mut acc = 0.0;
    for e in 0..graph.edge_count() {
        let w = graph.edge_weight(e);
        let mag2: f64 = field.values.row(e).iter().map(|v| v * v).sum();
        if p == 2.0 {
            acc += w * mag2;
        } else {
            acc += w * mag2.sqrt().powf(p);
        }
    }
    acc
}

/// Edge norm ||V||_{l^p(X^2)} = ((1/2) sum_ij w_ij |V(i,j)|^p)^(1/p), p >= 1.
pub fn edge_norm_p(graph: &SparseGraph, field: &EdgeField, p: f64) -> Result<f64> {
    field.check(graph)?;
    if !(p >= 1.0) {
        return Err(Error::InvalidP(p));
    }
    Ok(edge_norm_pow(graph, field, p).powf(1.0 / p))
}

/// Weighted mean (u)_{a,X} = sum_i a_i u(x_i) / sum_i a_i.
pub fn weighted_mean(u: &NodeMatrix, a: &[f64]) -> Result<Array1<f64>> {
    if u.nrows() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: u.nrows(),
            got: a.len(),
        });
    }
    let total: f64 = a.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NonpositiveWeightSum(total));
    }
    let mut acc = Array1::zeros(u.ncols());
    for (row, &ai) in u.rows().into_iter().zip(a.iter()) {
        for (s, &v) in acc.iter_mut().zip(row.iter()) {
            *s += ai * v;
        }
    }
    Ok(acc / total)
}

/// Uniform mean over nodes, (u)_X.
pub fn node_mean(u: &NodeMatrix) -> Array1<f64> {
    let n = u.nrows() as f64;
    u.sum_axis(Axis(0)) / n
}

/// Dirichlet energy (1/2) ||grad u||^2. On one-hot labelings this is the
/// graph-cut value of the class partition.
pub fn dirichlet_energy(graph: &SparseGraph, u: &NodeMatrix) -> Result<f64> {
    let grad = gradient(graph, u)?;
    Ok(0.5 * edge_norm_pow(graph, &grad, 2.0))
}

/// Cut energy of a one-hot labeling; identical to [`dirichlet_energy`].
pub fn cut_energy(graph: &SparseGraph, u: &NodeMatrix) -> Result<f64> {
    dirichlet_energy(graph, u)
}

/// Ginzburg-Landau energy: (1/2) ||grad u||^2 + (1/tau) sum_i prod_j |u(x_i) - e_j|^2.
///
/// The multi-well potential vanishes exactly on the simplex vertices, so on
/// one-hot states this reduces to the cut energy.
pub fn gl_energy(graph: &SparseGraph, u: &NodeMatrix, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidTau(tau));
    }
    check_node_matrix(graph, u)?;
    let k = u.ncols();
    let mut potential = 0.0;
    for row in u.rows() {
        let sq: f64 = row.iter().map(|v| v * v).sum();
        let mut prod = 1.0;
        for j in 0..k {
            // |row - e_j|^2 = |row|^2 - 2 row_j + 1
            prod *= sq - 2.0 * row[j] + 1.0;
        }
        potential += prod;
    }
    Ok(dirichlet_energy(graph, u)? + potential / tau)
}

/// The variational objective I_p(u) = (1/p) ||grad u||_p^p
/// - mu * sum_j (y_j - ybar) . u(x_j), for p > 1.
pub fn poisson_energy(
    graph: &SparseGraph,
    u: &NodeMatrix,
    labels: &LabelSet,
    p: f64,
    mu: f64,
) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidP(p));
    }
    check_node_matrix(graph, u)?;
    if u.ncols() != labels.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: labels.num_classes(),
            got: u.ncols(),
        });
    }
    labels.check_in_range(graph.node_count())?;
    let grad = gradient(graph, u)?;
    let ybar = labels.ybar();
    let mut fidelity = 0.0;
    for &(i, c) in labels.entries() {
        let row = u.row(i);
        // (y_j - ybar) . u(x_j) with y_j = e_c
        let mut dot = row[c];
        for (v, &yb) in row.iter().zip(ybar.iter()) {
            dot -= yb * v;
        }
        fidelity += dot;
    }
    Ok(edge_norm_pow(graph, &grad, p) / p - mu * fidelity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SparseGraph;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path3() -> SparseGraph {
        SparseGraph::from_undirected_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn gradient_on_path() {
        let g = path3();
        let u = array![[0.0], [1.0], [3.0]];
        let v = gradient(&g, &u).unwrap();
        assert_eq!(v.get(&g, 0, 1).unwrap()[0], 1.0);
        assert_eq!(v.get(&g, 1, 2).unwrap()[0], 2.0);
        assert_eq!(v.get(&g, 1, 0).unwrap()[0], -1.0);
    }

    #[test]
    fn gradient_of_constant_is_zero_and_shift_invariant() {
        let g = path3();
        let c = Array2::from_elem((3, 2), 4.5);
        assert!(gradient(&g, &c).unwrap().values().iter().all(|&v| v == 0.0));

        let u = array![[0.0, 2.0], [1.0, -1.0], [3.0, 0.5]];
        let shifted = &u + 7.25;
        let v1 = gradient(&g, &u).unwrap();
        let v2 = gradient(&g, &shifted).unwrap();
        assert_eq!(v1.values(), v2.values());
    }

    #[test]
    fn divergence_on_path() {
        let g = path3();
        let mut v = EdgeField::zeros(&g, 1);
        // Edge ids are row-major: (0,1) then (1,2).
        v.values_mut()[[0, 0]] = 1.0;
        v.values_mut()[[1, 0]] = 2.0;
        let d = divergence(&g, &v).unwrap();
        assert_eq!(d, array![[1.0], [1.0], [-2.0]]);
    }

    #[test]
    fn laplacian_on_path() {
        let g = path3();
        let u = array![[0.0], [1.0], [3.0]];
        let lu = laplacian_apply(&g, &u).unwrap();
        assert_eq!(lu, array![[-1.0], [-1.0], [2.0]]);
        assert!(lu.sum().abs() < 1e-12);
        // -div(grad u) agrees.
        let d = divergence(&g, &gradient(&g, &u).unwrap()).unwrap();
        assert_eq!(-&d, lu);
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = path3();
        let c = Array2::from_elem((3, 3), -2.0);
        let lu = laplacian_apply(&g, &c).unwrap();
        assert!(lu.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn edge_norm_examples() {
        let g = path3();
        let u = array![[0.0], [1.0], [3.0]];
        let grad = gradient(&g, &u).unwrap();
        let n2 = edge_norm_p(&g, &grad, 2.0).unwrap();
        assert!((n2 * n2 - 5.0).abs() < 1e-12);
        // (Lu, u) = ||grad u||^2
        let lu = laplacian_apply(&g, &u).unwrap();
        let dot: f64 = lu.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
        assert!((dot - 5.0).abs() < 1e-12);

        let zero = EdgeField::zeros(&g, 1);
        assert_eq!(edge_norm_p(&g, &zero, 2.0).unwrap(), 0.0);
        assert!(matches!(
            edge_norm_p(&g, &zero, 0.5),
            Err(Error::InvalidP(_))
        ));
    }

    #[test]
    fn weighted_mean_examples() {
        let u = array![[0.0], [1.0], [3.0]];
        let m = weighted_mean(&u, &[1.0, 2.0, 1.0]).unwrap();
        assert_eq!(m[0], 1.25);
        let uniform = weighted_mean(&u, &[1.0, 1.0, 1.0]).unwrap();
        assert!((uniform[0] - node_mean(&u)[0]).abs() < 1e-15);
        let c = Array2::from_elem((3, 2), 3.25);
        let mc = weighted_mean(&c, &[0.5, 0.5, 1.0]).unwrap();
        assert!((mc[0] - 3.25).abs() < 1e-15);
        assert!(matches!(
            weighted_mean(&u, &[0.0, 0.0, 0.0]),
            Err(Error::NonpositiveWeightSum(_))
        ));
        assert!(matches!(
            weighted_mean(&u, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cut_energy_on_path_labeling() {
        let g = path3();
        // Rows e1, e1, e2: the cut crosses edge (1, 2) only.
        let u = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!((cut_energy(&g, &u).unwrap() - 1.0).abs() < 1e-15);
        // Constant labeling costs nothing.
        let c = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        assert_eq!(cut_energy(&g, &c).unwrap(), 0.0);
        // Permuting channels leaves the energy unchanged.
        let swapped = array![[0.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        assert_eq!(
            cut_energy(&g, &u).unwrap(),
            cut_energy(&g, &swapped).unwrap()
        );
    }

    #[test]
    fn gl_energy_examples() {
        let g = path3();
        let onehot = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert_eq!(
            gl_energy(&g, &onehot, 2.0).unwrap(),
            dirichlet_energy(&g, &onehot).unwrap()
        );

        let single = SparseGraph::from_undirected_edges(1, &[]).unwrap();
        let u = array![[0.5, 0.5]];
        assert!((gl_energy(&single, &u, 1.0).unwrap() - 0.25).abs() < 1e-15);
        // Nonincreasing in tau when the potential is nonzero.
        assert!(gl_energy(&single, &u, 2.0).unwrap() < gl_energy(&single, &u, 1.0).unwrap());
        assert!(matches!(
            gl_energy(&single, &u, 0.0),
            Err(Error::InvalidTau(_))
        ));
    }

    #[test]
    fn poisson_energy_zero_at_zero() {
        let g = path3();
        let labels = LabelSet::new(vec![(0, 0), (2, 1)], 2).unwrap();
        let u = Array2::zeros((3, 2));
        assert_eq!(poisson_energy(&g, &u, &labels, 2.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            poisson_energy(&g, &u, &labels, 1.0, 1.0),
            Err(Error::InvalidP(_))
        ));
    }

    fn random_graph_and_field(seed: u64, n: usize, k: usize) -> (SparseGraph, NodeMatrix, EdgeField) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 1..n {
            let parent = rng.random_range(0..i);
            edges.push((parent, i, rng.random_range(0.2..2.0)));
        }
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                edges.push((i.min(j), i.max(j), rng.random_range(0.2..2.0)));
            }
        }
        let g = SparseGraph::from_undirected_edges(n, &edges).unwrap();
        let mut u = Array2::zeros((n, k));
        for v in u.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut field = EdgeField::zeros(&g, k);
        for v in field.values_mut().iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        (g, u, field)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// (grad u, V) = -(u, div V): the divergence is the negative adjoint
        /// of the gradient.
        #[test]
        fn adjointness(seed in 0u64..10_000, n in 2usize..40, k in 1usize..4) {
            let (g, u, field) = random_graph_and_field(seed, n, k);
            let grad = gradient(&g, &u).unwrap();
            let lhs = edge_inner(&g, &grad, &field).unwrap();
            let div = divergence(&g, &field).unwrap();
            let rhs: f64 = u.iter().zip(div.iter()).map(|(a, b)| a * b).sum();
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            prop_assert!((lhs + rhs).abs() <= 1e-10 * scale);
        }

        /// L = -div grad, positive semidefiniteness and zero column sums.
        #[test]
        fn laplacian_identities(seed in 0u64..10_000, n in 2usize..40, k in 1usize..4) {
            let (g, u, _) = random_graph_and_field(seed, n, k);
            let lu = laplacian_apply(&g, &u).unwrap();
            let via_div = -divergence(&g, &gradient(&g, &u).unwrap()).unwrap();
            let scale = lu.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
            for (a, b) in lu.iter().zip(via_div.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
            // (Lu, u) = ||grad u||^2 >= 0
            let quad: f64 = lu.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            let grad = gradient(&g, &u).unwrap();
            let norm2 = edge_inner(&g, &grad, &grad).unwrap();
            prop_assert!(quad >= -1e-10 * norm2.max(1.0));
            prop_assert!((quad - norm2).abs() <= 1e-10 * norm2.max(1.0));
            // Column sums vanish.
            let unorm = u.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            for s in lu.sum_axis(Axis(0)).iter() {
                prop_assert!(s.abs() <= 1e-10 * unorm.max(1.0));
            }
        }

        /// Stored gradients are antisymmetric under orientation flip.
        #[test]
        fn gradient_antisymmetry(seed in 0u64..10_000, n in 2usize..20) {
            let (g, u, _) = random_graph_and_field(seed, n, 2);
            let grad = gradient(&g, &u).unwrap();
            for e in 0..g.edge_count() {
                let (i, j) = g.edge_endpoints(e);
                let fwd = grad.get(&g, i, j).unwrap();
                let bwd = grad.get(&g, j, i).unwrap();
                for (a, b) in fwd.iter().zip(bwd.iter()) {
                    prop_assert_eq!(*a, -*b);
                }
            }
        }
    }
}
