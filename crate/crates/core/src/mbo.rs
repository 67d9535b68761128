//! Graph-cut refinement of Poisson learning: alternate gradient-descent
//! sweeps on the smooth part of the energy with a volume-constrained
//! projection onto the simplex vertices.

use crate::calculus::NodeMatrix;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::labels::{ClassPrior, LabelSet};
use crate::poisson::{self, SolveReport, Stopping};
use ndarray::{Array1, Array2};
use rayon::prelude::*;

/// Parameters of the MBO scheme. The defaults are the values used in all of
/// the reference experiments.
#[derive(Debug, Clone, Copy)]
pub struct MboParams {
    /// Fidelity weight on the label sources.
    pub mu: f64,
    /// Descent sweeps per outer round.
    pub n_inner: usize,
    /// Outer rounds (descent block + projection).
    pub n_outer: usize,
    /// Descent time step; None selects 1/max_i d_i at run time.
    pub dt: Option<f64>,
    /// Ascent step of the volume-constraint weights.
    pub dtau: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Ascent iterations of the weight loop.
    pub s_iters: usize,
    /// Stopping rule for the initializing Poisson solve; None selects the
    /// mixing-time default for the graph at hand.
    pub stopping: Option<Stopping>,
}

impl Default for MboParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            n_inner: 40,
            n_outer: 20,
            dt: None,
            dtau: 10.0,
            s_min: 0.5,
            s_max: 2.0,
            s_iters: 100,
            stopping: None,
        }
    }
}

impl MboParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if self.n_inner < 1 || self.n_outer < 1 || self.s_iters < 1 {
            return bad("n_inner, n_outer and s_iters must be at least 1");
        }
        if !(self.s_min > 0.0 && self.s_min <= 1.0 && self.s_max >= 1.0) {
            return bad("need 0 < s_min <= 1 <= s_max");
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad("dt must be positive");
            }
        }
        if !(self.dtau > 0.0) {
            return bad("dtau must be positive");
        }
        Ok(())
    }
}

/// One explicit Euler step on the smooth energy:
/// `u <- u - dt (L u - mu * source)`. Both `L u` and the source have zero
/// column sums, so the step conserves the uniform mean (volume preserving).
pub fn e1_descent_step(
    graph: &SparseGraph,
    u: &NodeMatrix,
    source: &NodeMatrix,
    mu: f64,
    dt: f64,
) -> Result<NodeMatrix> {
    let n = graph.node_count();
    let k = u.ncols();
    if u.nrows() != n || source.nrows() != n || source.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u.nrows().min(source.nrows()),
        });
    }
    let u_std = u.as_standard_layout();
    let us = u_std.as_slice().expect("standard layout");
    let src_std = source.as_standard_layout();
    let ss = src_std.as_slice().expect("standard layout");
    let degrees = graph.degrees();
    let mut next = Array2::zeros((n, k));
    next.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(i, row)| {
            let ui = &us[i * k..(i + 1) * k];
            let si = &ss[i * k..(i + 1) * k];
            // L u = d_i u_i - sum_j w_ij u_j
            for c in 0..k {
                row[c] = degrees[i] * ui[c] - mu * si[c];
            }
            for (j, w) in graph.row(i) {
                let uj = &us[j * k..(j + 1) * k];
                for c in 0..k {
                    row[c] -= w * uj[c];
                }
            }
            for c in 0..k {
                row[c] = ui[c] - dt * row[c];
            }
        });
    Ok(next)
}

/// Closest simplex vertex to `v`: the one-hot of the largest component
/// (lowest index on ties).
pub fn simplex_vertex_projection(v: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(v.len());
    out[argmax(v.as_slice().expect("contiguous"))] = 1.0;
    out
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_v = row[0];
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > best_v {
            best_v = v;
            best = j;
        }
    }
    best
}

/// Row-wise projection of `u * diag(s)` onto the simplex vertices, returned
/// as argmax indices.
fn project_classes(u: &NodeMatrix, s: &[f64]) -> Vec<usize> {
    let k = u.ncols();
    let u_std = u.as_standard_layout();
    let us = u_std.as_slice().expect("standard layout");
    let mut scaled = vec![0.0f64; k];
    (0..u.nrows())
        .map(|i| {
            let row = &us[i * k..(i + 1) * k];
            for c in 0..k {
                scaled[c] = row[c] * s[c];
            }
            argmax(&scaled)
        })
        .collect()
}

/// Volume-constrained projection: run `s_iters` ascent steps on the class
/// weights s (clipped to [s_min, s_max]), driving the class fractions of the
/// projected labeling toward the prior b, then project with the final s.
/// Every output row is exactly a one-hot vector; the constraint is enforced
/// only approximately.
pub fn volume_projection(
    u: &NodeMatrix,
    prior: &ClassPrior,
    params: &MboParams,
) -> Result<NodeMatrix> {
    params.validate()?;
    let k = u.ncols();
    if prior.num_classes() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: prior.num_classes(),
        });
    }
    let n = u.nrows() as f64;
    let b = prior.values();
    let mut s = vec![1.0f64; k];
    for _ in 0..params.s_iters {
        let classes = project_classes(u, &s);
        let mut bhat = vec![0.0f64; k];
        for &c in &classes {
            bhat[c] += 1.0 / n;
        }
        for j in 0..k {
            s[j] = (s[j] + params.dtau * (b[j] - bhat[j]))
                .min(params.s_max)
                .max(params.s_min);
        }
    }
    let classes = project_classes(u, &s);
    let mut out = Array2::zeros(u.dim());
    for (i, &c) in classes.iter().enumerate() {
        out[[i, c]] = 1.0;
    }
    Ok(out)
}

/// The full scheme: scale the prior-adjusted Poisson solution by mu, then
/// alternate `n_inner` descent sweeps with the volume-constrained projection
/// for `n_outer` rounds. Returns the final one-hot matrix, its classes, and
/// the report of the initializing Poisson solve.
pub fn poisson_mbo(
    graph: &SparseGraph,
    labels: &LabelSet,
    prior: &ClassPrior,
    params: &MboParams,
) -> Result<(NodeMatrix, Vec<usize>, SolveReport)> {
    params.validate()?;
    let n = graph.node_count();
    let k = labels.num_classes();
    if k < 2 {
        return Err(Error::InvalidParameter(
            "Poisson MBO needs at least two classes".into(),
        ));
    }
    if prior.num_classes() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: prior.num_classes(),
        });
    }
    let stopping = params.stopping.unwrap_or_else(|| Stopping::default_mixing(n));
    let (u0, report) = poisson::poisson_solve(graph, labels, stopping)?;
    let mut u = poisson::apply_class_prior(&u0, &labels.ybar(), prior)?;
    u *= params.mu;

    let source = poisson::source_matrix(labels, n)?;
    let dt = params.dt.unwrap_or_else(|| 1.0 / graph.max_degree());
    for _ in 0..params.n_outer {
        for _ in 0..params.n_inner {
            u = e1_descent_step(graph, &u, &source, params.mu, dt)?;
        }
        u = volume_projection(&u, prior, params)?;
    }
    let classes = poisson::label_decision(&u);
    Ok((u, classes, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::node_mean;
    use crate::synth::synth_two_cliques;
    use ndarray::array;

    fn path3() -> SparseGraph {
        SparseGraph::from_undirected_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn e1_step_hand_example() {
        let g = path3();
        let u = array![[0.0], [1.0], [3.0]];
        let source = Array2::zeros((3, 1));
        let next = e1_descent_step(&g, &u, &source, 1.0, 0.5).unwrap();
        // u - (1/2) Lu with Lu = (-1, -1, 2).
        assert_eq!(next, array![[0.5], [1.5], [2.0]]);
    }

    #[test]
    fn e1_step_fixed_point() {
        // u solves Lu = mu * source -> the step leaves it alone.
        let g = path3();
        let labels = LabelSet::new(vec![(0, 0), (2, 1)], 2).unwrap();
        let u = array![[0.5, -0.5], [0.0, 0.0], [-0.5, 0.5]];
        let source = poisson::source_matrix(&labels, 3).unwrap();
        let next = e1_descent_step(&g, &u, &source, 1.0, 0.25).unwrap();
        assert!(crate::oracle::max_abs(&(&next - &u)) < 1e-15);
    }

    #[test]
    fn e1_step_conserves_mean() {
        let g = crate::synth::synth_random_connected(50, 2.0, 13);
        let labels = LabelSet::new(vec![(0, 0), (10, 1), (30, 2)], 3).unwrap();
        let source = poisson::source_matrix(&labels, 50).unwrap();
        let mut rng = {
            use rand::SeedableRng;
            rand_chacha::ChaCha8Rng::seed_from_u64(2)
        };
        use rand::Rng;
        let mut u = Array2::zeros((50, 3));
        for v in u.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let before = node_mean(&u);
        let dt = 1.0 / g.max_degree();
        for _ in 0..40 {
            u = e1_descent_step(&g, &u, &source, 1.0, dt).unwrap();
        }
        let after = node_mean(&u);
        for (a, b) in before.iter().zip(after.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_projection_examples() {
        assert_eq!(
            simplex_vertex_projection(&array![0.9, 0.1]),
            array![1.0, 0.0]
        );
        assert_eq!(
            simplex_vertex_projection(&array![0.5, 0.5]),
            array![1.0, 0.0]
        );
        // Brute force over both vertices: |v - e0|^2 = 8 < |v - e1|^2 = 10.
        assert_eq!(
            simplex_vertex_projection(&array![-1.0, -2.0]),
            array![1.0, 0.0]
        );
    }

    #[test]
    fn volume_projection_satisfied_constraint_is_stable() {
        let u = array![[0.9, 0.1], [0.2, 0.8]];
        let out = volume_projection(&u, &ClassPrior::uniform(2), &MboParams::default()).unwrap();
        assert_eq!(out, array![[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn volume_projection_flips_by_clipped_ratio() {
        // All rows favor class 0 but the prior demands class 1; s clips to
        // (0.5, 2), so rows with u1/u0 > 0.25 flip.
        let u = array![[0.9, 0.1], [0.8, 0.3], [1.0, 0.26]];
        let prior = ClassPrior::new(array![0.0, 1.0]).unwrap();
        let out = volume_projection(&u, &prior, &MboParams::default()).unwrap();
        assert_eq!(out, array![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]);
        // Rows are one-hot.
        for row in out.rows() {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.sum(), 1.0);
        }
    }

    #[test]
    fn volume_projection_scale_invariant() {
        let u = array![[0.9, 0.1], [0.2, 0.8], [0.4, 0.45]];
        let prior = ClassPrior::uniform(2);
        let p = MboParams::default();
        let a = volume_projection(&u, &prior, &p).unwrap();
        let b = volume_projection(&(&u * 12.5), &prior, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fully_labeled_instance_is_reproduced() {
        let g = crate::synth::synth_random_connected(16, 2.0, 3);
        let truth: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let entries: Vec<(usize, usize)> = truth.iter().copied().enumerate().collect();
        let labels = LabelSet::new(entries, 2).unwrap();
        let prior = ClassPrior::empirical(&truth, 2).unwrap();
        let (_, classes, _) = poisson_mbo(&g, &labels, &prior, &MboParams::default()).unwrap();
        assert_eq!(classes, truth);
    }

    #[test]
    fn two_cliques_recovered_exactly() {
        let (g, truth) = synth_two_cliques(10);
        let labels = LabelSet::new(vec![(0, 0), (10, 1)], 2).unwrap();
        let prior = ClassPrior::uniform(2);
        let (onehot, classes, _) = poisson_mbo(&g, &labels, &prior, &MboParams::default()).unwrap();
        assert_eq!(classes, truth);
        for (i, &c) in classes.iter().enumerate() {
            assert_eq!(onehot[[i, c]], 1.0);
        }
        // The clique labeling beats any single-flip perturbation on cut energy.
        let mut ideal = Array2::zeros((20, 2));
        for (i, &c) in truth.iter().enumerate() {
            ideal[[i, c]] = 1.0;
        }
        let base = crate::calculus::cut_energy(&g, &ideal).unwrap();
        for flip in 0..20 {
            let mut pert = ideal.clone();
            let c = truth[flip];
            pert[[flip, c]] = 0.0;
            pert[[flip, 1 - c]] = 1.0;
            assert!(crate::calculus::cut_energy(&g, &pert).unwrap() > base);
        }
    }

    #[test]
    fn class_swap_symmetry() {
        let (g, _) = synth_two_cliques(6);
        let labels = LabelSet::new(vec![(0, 0), (6, 1)], 2).unwrap();
        let swapped = LabelSet::new(vec![(0, 1), (6, 0)], 2).unwrap();
        let prior = ClassPrior::uniform(2);
        let p = MboParams::default();
        let (_, a, _) = poisson_mbo(&g, &labels, &prior, &p).unwrap();
        let (_, b, _) = poisson_mbo(&g, &swapped, &prior, &p).unwrap();
        let flipped: Vec<usize> = b.iter().map(|&c| 1 - c).collect();
        assert_eq!(a, flipped);
    }

    #[test]
    fn params_validation() {
        let mut p = MboParams::default();
        p.s_min = 1.5;
        assert!(p.validate().is_err());
        let mut p = MboParams::default();
        p.mu = 0.0;
        assert!(p.validate().is_err());
        let mut p = MboParams::default();
        p.n_outer = 0;
        assert!(p.validate().is_err());
    }
}
