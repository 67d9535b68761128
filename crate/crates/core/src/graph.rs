//! Sparse symmetric weighted graphs and k-nearest-neighbor construction.
//!
//! The graph is stored in compressed sparse row form with neighbor lists
//! sorted by index. Symmetry is established at construction time and every
//! stored entry `(i, j, w)` has a mirror `(j, i, w)` with the bit-identical
//! weight, so downstream solvers can rely on `w_ij == w_ji` exactly.

use crate::error::{Error, Result};
use ndarray::Array2;
use rayon::prelude::*;

/// Latent feature vectors, one row per point.
pub type FeatureMatrix = Array2<f64>;

/// Symmetric nonnegative weighted graph over `n` nodes.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    /// For each CSR slot, the id of the undirected edge (i < j) it belongs
    /// to. Self-loop slots get `usize::MAX`; they carry no vector-field value.
    edge_ids: Vec<usize>,
    /// Endpoints (i, j) with i < j of every undirected edge, in id order.
    edge_endpoints: Vec<(usize, usize)>,
}

/// Options for [`build_knn_graph`].
#[derive(Debug, Clone, Copy)]
pub struct KnnParams {
    /// Zero the diagonal of the symmetrized weight matrix.
    pub zero_diagonal: bool,
    /// When a point's k-th neighbor distance is zero (duplicate points),
    /// substitute the smallest strictly positive neighbor distance instead
    /// of failing.
    pub degenerate_fallback: bool,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            zero_diagonal: true,
            degenerate_fallback: false,
        }
    }
}

impl SparseGraph {
    /// Build from an undirected edge list; each `(i, j, w)` inserts both
    /// `(i, j)` and `(j, i)`. Duplicate pairs are summed. Self loops are kept
    /// as given (inserted once).
    pub fn from_undirected_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            check_entry(n, i, j, w)?;
            adj[i].push((j, w));
            if i != j {
                adj[j].push((i, w));
            }
        }
        Ok(Self::from_adjacency(n, adj))
    }

    /// Build from directed entries that are expected to already be symmetric;
    /// validates that every `(i, j, w)` has a reverse entry with the identical
    /// weight (after summing duplicates). Used by the graph-file loader.
    pub fn from_symmetric_entries(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in entries {
            check_entry(n, i, j, w)?;
            adj[i].push((j, w));
        }
        let g = Self::from_adjacency(n, adj);
        g.validate_symmetry()?;
        Ok(g)
    }

    /// Internal: sort rows, merge duplicate columns by summation, cache degrees.
    fn from_adjacency(n: usize, mut adj: Vec<Vec<(usize, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for row in adj.iter_mut() {
            // Stable sort keeps duplicate insertion order, so the merged sum
            // below is order-deterministic.
            row.sort_by_key(|&(j, _)| j);
            let mut it = row.iter().peekable();
            while let Some(&(j, w)) = it.next() {
                let mut sum = w;
                while let Some(&&(j2, w2)) = it.peek() {
                    if j2 != j {
                        break;
                    }
                    sum += w2;
                    it.next();
                }
                cols.push(j);
                weights.push(sum);
            }
            offsets.push(cols.len());
        }
        let degrees = (0..n)
            .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
            .collect();
        let (edge_ids, edge_endpoints) = index_undirected(n, &offsets, &cols);
        Self {
            n,
            offsets,
            cols,
            weights,
            degrees,
            edge_ids,
            edge_endpoints,
        }
    }

    fn validate_symmetry(&self) -> Result<()> {
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                if j == i {
                    continue;
                }
                match self.weight(j, i) {
                    Some(w_rev) if w_rev == w => {}
                    _ => return Err(Error::AsymmetricEdge { i, j }),
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of stored directed entries (both orientations counted).
    pub fn entry_count(&self) -> usize {
        self.cols.len()
    }

    /// Number of undirected edges (i < j), excluding self loops.
    pub fn edge_count(&self) -> usize {
        self.edge_endpoints.len()
    }

    /// Endpoints (i, j) with i < j of undirected edge `eid`.
    pub fn edge_endpoints(&self, eid: usize) -> (usize, usize) {
        self.edge_endpoints[eid]
    }

    /// Weight of undirected edge `eid`.
    pub fn edge_weight(&self, eid: usize) -> f64 {
        let (i, j) = self.edge_endpoints[eid];
        self.weight(i, j).expect("edge endpoints are stored")
    }

    /// Neighbor list of node `i`, sorted by index.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    /// Neighbor list of node `i` together with the undirected-edge id per slot.
    pub(crate) fn row_with_edges(
        &self,
        i: usize,
    ) -> impl Iterator<Item = (usize, f64, usize)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r.clone()].iter().copied())
            .zip(self.edge_ids[r].iter().copied())
            .map(|((j, w), e)| (j, w, e))
    }

    /// Stored weight of entry (i, j), or None when absent.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let r = self.offsets[i]..self.offsets[i + 1];
        let cols = &self.cols[r.clone()];
        cols.binary_search(&j).ok().map(|p| self.weights[r][p])
    }

    /// Cached degree vector, d_i = sum_j w_ij.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().fold(0.0, |a, &d| a.max(d))
    }

    pub fn total_degree(&self) -> f64 {
        self.degrees.iter().sum()
    }

    /// True iff every node is reachable from node 0 via edges of strictly
    /// positive weight. Vacuously true for graphs with at most one node.
    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1usize;
        while let Some(i) = stack.pop() {
            for (j, w) in self.row(i) {
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n
    }

    /// Multiply every weight by `c > 0` (degrees rescale with it).
    pub fn scaled(&self, c: f64) -> Self {
        let mut g = self.clone();
        for w in g.weights.iter_mut() {
            *w *= c;
        }
        for d in g.degrees.iter_mut() {
            *d *= c;
        }
        g
    }

    /// All stored entries as (i, j, w) triples, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }
}

fn check_entry(n: usize, i: usize, j: usize, w: f64) -> Result<()> {
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    if !w.is_finite() || w < 0.0 {
        return Err(Error::InvalidWeight { i, j, weight: w });
    }
    Ok(())
}

/// Assign ids to undirected edges (i < j) in row-major order and map every
/// CSR slot to its edge id. Self loops map to `usize::MAX`.
fn index_undirected(
    n: usize,
    offsets: &[usize],
    cols: &[usize],
) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut edge_ids = vec![usize::MAX; cols.len()];
    let mut endpoints = Vec::new();
    // First pass: number the upper-triangle slots.
    for i in 0..n {
        for s in offsets[i]..offsets[i + 1] {
            let j = cols[s];
            if j > i {
                edge_ids[s] = endpoints.len();
                endpoints.push((i, j));
            }
        }
    }
    // Second pass: lower-triangle slots look up the mirrored edge.
    for i in 0..n {
        for s in offsets[i]..offsets[i + 1] {
            let j = cols[s];
            if j < i {
                let row_j = &cols[offsets[j]..offsets[j + 1]];
                let p = row_j
                    .binary_search(&i)
                    .expect("symmetric storage guarantees the mirror entry");
                edge_ids[s] = edge_ids[offsets[j] + p];
            }
        }
    }
    (edge_ids, endpoints)
}

/// Build the symmetrized Gaussian-weight k-nearest-neighbor graph.
///
/// Directed weights are `w_ij = exp(-4 |x_i - x_j|^2 / d_k(x_i)^2)` for the k
/// nearest neighbors of `i` (self excluded, Euclidean distance), where
/// `d_k(x_i)` is the distance to the k-th nearest neighbor. The result is
/// `W + W^T`. Distance ties break toward the lower node index.
pub fn build_knn_graph(features: &FeatureMatrix, k: usize, params: KnnParams) -> Result<SparseGraph> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::EmptyInput(n));
    }
    if k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "feature matrix contains non-finite entries".into(),
        ));
    }

    let rows: std::result::Result<Vec<Vec<(usize, f64)>>, Error> = (0..n)
        .into_par_iter()
        .map(|i| knn_row(features, i, k, params.degenerate_fallback))
        .collect();
    let directed = rows?;

    // W + W^T: scatter reverse entries, then merge per row. Addition of the
    // same pair of floats is commutative, so the merged weights are
    // bit-identical in both orientations.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in directed.iter().enumerate() {
        for &(j, w) in row {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    let mut g = SparseGraph::from_adjacency(n, adj);
    if params.zero_diagonal {
        remove_self_loops(&mut g);
    }
    Ok(g)
}

/// One point's directed k-NN weights. Exact brute force with partial select.
fn knn_row(
    features: &FeatureMatrix,
    i: usize,
    k: usize,
    degenerate_fallback: bool,
) -> Result<Vec<(usize, f64)>> {
    let n = features.nrows();
    let xi = features.row(i);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for j in 0..n {
        if j == i {
            continue;
        }
        let mut d2 = 0.0;
        for (a, b) in xi.iter().zip(features.row(j).iter()) {
            let t = a - b;
            d2 += t * t;
        }
        cand.push((d2, j));
    }
    // Ties in distance break toward the lower index.
    cand.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
    let mut nearest: Vec<(f64, usize)> = cand[..k].to_vec();
    nearest.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut dk2 = nearest[k - 1].0;
    if dk2 == 0.0 {
        if !degenerate_fallback {
            return Err(Error::DegenerateScale(i));
        }
        dk2 = cand
            .iter()
            .map(|&(d2, _)| d2)
            .filter(|&d2| d2 > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !dk2.is_finite() {
            return Err(Error::DegenerateScale(i));
        }
    }
    Ok(nearest
        .into_iter()
        .map(|(d2, j)| (j, (-4.0 * d2 / dk2).exp()))
        .collect())
}

fn remove_self_loops(g: &mut SparseGraph) {
    let has_loops = (0..g.n).any(|i| g.weight(i, i).is_some());
    if !has_loops {
        return;
    }
    let adj: Vec<Vec<(usize, f64)>> = (0..g.n)
        .map(|i| g.row(i).filter(|&(j, _)| j != i).collect())
        .collect();
    *g = SparseGraph::from_adjacency(g.n, adj);
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    pub(crate) fn path_graph(weights: &[f64]) -> SparseGraph {
        let edges: Vec<(usize, usize, f64)> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (i, i + 1, w))
            .collect();
        SparseGraph::from_undirected_edges(weights.len() + 1, &edges).unwrap()
    }

    #[test]
    fn two_points_single_edge_weight() {
        let f = array![[0.0, 0.0], [3.0, 4.0]];
        let g = build_knn_graph(&f, 1, KnnParams::default()).unwrap();
        // Each direction contributes exp(-4 * D^2/D^2); symmetrization doubles it.
        let expected = 2.0 * (-4.0f64).exp();
        assert_eq!(g.weight(0, 1), Some(expected));
        assert_eq!(g.weight(1, 0), Some(expected));
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn collinear_three_points() {
        let f = array![[0.0], [1.0], [3.0]];
        let g = build_knn_graph(&f, 1, KnnParams::default()).unwrap();
        let e4 = (-4.0f64).exp();
        // 0 and 1 pick each other; 2 picks 1 with d_k = 2, ratio 4/4 = 1.
        assert!((g.weight(0, 1).unwrap() - 2.0 * e4).abs() < 1e-15);
        assert!((g.weight(1, 2).unwrap() - e4).abs() < 1e-15);
        assert_eq!(g.weight(0, 2), None);
    }

    #[test]
    fn knn_zero_diagonal() {
        let f = array![[0.0], [1.0], [3.0], [7.0]];
        let g = build_knn_graph(&f, 2, KnnParams::default()).unwrap();
        for i in 0..4 {
            assert_eq!(g.weight(i, i), None);
        }
    }

    #[test]
    fn knn_duplicate_points_error_and_fallback() {
        let f = array![[0.0], [0.0], [5.0]];
        let err = build_knn_graph(&f, 1, KnnParams::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateScale(_)));

        let params = KnnParams {
            degenerate_fallback: true,
            ..KnnParams::default()
        };
        let g = build_knn_graph(&f, 1, params).unwrap();
        // Points 0 and 1 coincide; the fallback scale is the distance to
        // point 2 (= 5), so w_01 = 2 exp(-4 * 0 / 25) = 2.
        assert_eq!(g.weight(0, 1), Some(2.0));
    }

    #[test]
    fn knn_tie_breaks_toward_lower_index() {
        // Point 0 at origin; 1 and 2 both at distance 1. With k = 1, node 0
        // must pick node 1.
        let f = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let directed = knn_row(&f, 0, 1, false).unwrap();
        assert_eq!(directed[0].0, 1);
    }

    #[test]
    fn knn_exactly_k_out_edges_before_symmetrization() {
        let f = array![[0.0], [1.0], [2.5], [4.0], [8.0]];
        for i in 0..5 {
            let row = knn_row(&f, i, 3, false).unwrap();
            assert_eq!(row.len(), 3);
            assert!(row.iter().all(|&(j, _)| j != i));
        }
    }

    #[test]
    fn path_graph_degrees() {
        let g = path_graph(&[1.0, 1.0]);
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn empty_graph_zero_degrees() {
        let g = SparseGraph::from_undirected_edges(4, &[]).unwrap();
        assert_eq!(g.degrees(), &[0.0; 4]);
        assert!(!g.is_connected());
    }

    #[test]
    fn scaling_scales_degrees() {
        let g = path_graph(&[1.0, 2.0]).scaled(3.0);
        assert_eq!(g.degrees(), &[3.0, 9.0, 6.0]);
    }

    #[test]
    fn connectivity_basics() {
        assert!(path_graph(&[1.0, 1.0]).is_connected());
        let two_pairs =
            SparseGraph::from_undirected_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(!two_pairs.is_connected());
        let single = SparseGraph::from_undirected_edges(1, &[]).unwrap();
        assert!(single.is_connected());
    }

    #[test]
    fn zero_weight_edges_do_not_connect() {
        let g = SparseGraph::from_undirected_edges(3, &[(0, 1, 1.0), (1, 2, 0.0)]).unwrap();
        assert!(!g.is_connected());
    }

    #[test]
    fn symmetric_entries_validation() {
        let ok = SparseGraph::from_symmetric_entries(2, &[(0, 1, 0.5), (1, 0, 0.5)]);
        assert!(ok.is_ok());
        let bad = SparseGraph::from_symmetric_entries(2, &[(0, 1, 0.5), (1, 0, 0.25)]);
        assert!(matches!(bad, Err(Error::AsymmetricEdge { .. })));
        let missing = SparseGraph::from_symmetric_entries(2, &[(0, 1, 0.5)]);
        assert!(matches!(missing, Err(Error::AsymmetricEdge { .. })));
    }

    #[test]
    fn rejects_invalid_weights() {
        let neg = SparseGraph::from_undirected_edges(2, &[(0, 1, -1.0)]);
        assert!(matches!(neg, Err(Error::InvalidWeight { .. })));
        let nan = SparseGraph::from_undirected_edges(2, &[(0, 1, f64::NAN)]);
        assert!(matches!(nan, Err(Error::InvalidWeight { .. })));
    }

    #[test]
    fn knn_preconditions() {
        let one = array![[0.0]];
        assert!(matches!(
            build_knn_graph(&one, 1, KnnParams::default()),
            Err(Error::EmptyInput(1))
        ));
        let f = array![[0.0], [1.0]];
        assert!(matches!(
            build_knn_graph(&f, 2, KnnParams::default()),
            Err(Error::KTooLarge { .. })
        ));
    }

    /// Brute-force reachability closure used as the connectivity oracle.
    fn connected_by_closure(n: usize, edges: &[(usize, usize, f64)]) -> bool {
        let mut reach = vec![vec![false; n]; n];
        for i in 0..n {
            reach[i][i] = true;
        }
        for &(i, j, w) in edges {
            if w > 0.0 {
                reach[i][j] = true;
                reach[j][i] = true;
            }
        }
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][m] && reach[m][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        (0..n).all(|j| reach[0][j])
    }

    proptest! {
        #[test]
        fn connectivity_matches_transitive_closure(
            n in 1usize..=8,
            raw in prop::collection::vec((0usize..8, 0usize..8, 0.0f64..2.0), 0..16),
        ) {
            let edges: Vec<(usize, usize, f64)> = raw
                .into_iter()
                .filter(|&(i, j, _)| i < n && j < n && i != j)
                .collect();
            let g = SparseGraph::from_undirected_edges(n, &edges).unwrap();
            prop_assert_eq!(g.is_connected(), connected_by_closure(n, &edges));
        }

        #[test]
        fn knn_graph_is_bit_symmetric(
            seed in 0u64..1000,
            n in 4usize..24,
            k in 1usize..4,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut f = Array2::zeros((n, 3));
            for v in f.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let g = build_knn_graph(&f, k.min(n - 1), KnnParams::default()).unwrap();
            for (i, j, w) in g.entries() {
                // Bit-exact mirror weight.
                prop_assert_eq!(g.weight(j, i), Some(w));
            }
            // Degrees match independent recomputation in the same order.
            for i in 0..n {
                let d: f64 = g.row(i).map(|(_, w)| w).sum();
                prop_assert_eq!(d, g.degrees()[i]);
            }
        }
    }
}
