//! Poisson learning: labels act as point sources and sinks of a graph
//! Poisson equation rather than as hard constraints.
//!
//! The solver runs the recurrence `u <- u + D^{-1}(B - L u)` from `u = 0`,
//! which walks the solution toward the unique zero-degree-weighted-mean
//! solution of `L u = B`. Its natural stopping point is the mixing time of
//! the graph random walk, tracked by a cheap walker-distribution probe that
//! runs alongside the iteration. A Monte Carlo random-walk estimator of the
//! same quantity is provided as a correctness oracle.

use crate::calculus::NodeMatrix;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::labels::{ClassPrior, LabelSet};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// When to stop the Poisson iteration.
#[derive(Debug, Clone, Copy)]
pub enum Stopping {
    /// Run exactly T recurrence steps.
    FixedT(usize),
    /// Stop once the walker-distribution probe is within `epsilon` of the
    /// invariant distribution (in the max norm), or at `cap` iterations.
    MixingTime { epsilon: f64, cap: usize },
    /// Mixing-time phase followed by extra iterations until the residual
    /// `max |L u - B|` drops below `residual`, still capped at `cap`.
    MixingTimeThenResidual {
        epsilon: f64,
        residual: f64,
        cap: usize,
    },
}

impl Stopping {
    /// The default used in experiments: epsilon = 1/n with a 10n iteration cap.
    pub fn default_mixing(n: usize) -> Self {
        Stopping::MixingTime {
            epsilon: 1.0 / n as f64,
            cap: 10 * n.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCause {
    MixingTime,
    FixedT,
    MaxIterations,
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveWarning {
    /// The iteration cap was reached before the stopping rule was satisfied
    /// (on bipartite graphs the walker probe never converges).
    IterationCapReached,
    /// All labels belong to one class: the source vanishes, the solution is
    /// identically zero and the label decision is meaningless.
    SingleClassLabels,
}

/// What the solver did: iteration count, final residual `max |L u - B|`,
/// the worst degree-weighted-mean drift seen, and why it stopped.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub max_mean_drift: f64,
    pub stopped_by: StopCause,
    pub warnings: Vec<SolveWarning>,
}

/// Source term of the Poisson learning equation: row i is `y_j - ybar` when
/// node i carries label j, zero otherwise. Columns sum to zero.
pub fn source_matrix(labels: &LabelSet, n: usize) -> Result<NodeMatrix> {
    labels.check_in_range(n)?;
    let k = labels.num_classes();
    let ybar = labels.ybar();
    let mut b = Array2::zeros((n, k));
    for &(i, c) in labels.entries() {
        for (col, &yb) in ybar.iter().enumerate() {
            b[[i, col]] = -yb;
        }
        b[[i, c]] += 1.0;
    }
    Ok(b)
}

/// Degree-weighted source: row i is `d_i (y_i - ybar_w)` for labeled i, with
/// `ybar_w` the degree-weighted label mean. Also sums to zero.
pub fn degree_weighted_source(labels: &LabelSet, degrees: &[f64]) -> Result<NodeMatrix> {
    labels.check_in_range(degrees.len())?;
    let k = labels.num_classes();
    let ybar_w = crate::laplace::ybar_w(labels, degrees)?;
    let mut b = Array2::zeros((degrees.len(), k));
    for &(i, c) in labels.entries() {
        let d = degrees[i];
        for (col, &yb) in ybar_w.iter().enumerate() {
            b[[i, col]] = -d * yb;
        }
        b[[i, c]] += d;
    }
    Ok(b)
}

/// Which source term [`poisson_solve_with`] builds from the labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SourceMode {
    #[default]
    Standard,
    DegreeWeighted,
}

/// Solve the Poisson learning equation with the standard source.
pub fn poisson_solve(
    graph: &SparseGraph,
    labels: &LabelSet,
    stopping: Stopping,
) -> Result<(NodeMatrix, SolveReport)> {
    poisson_solve_with(graph, labels, stopping, SourceMode::Standard)
}

/// Solve with a selectable source construction.
pub fn poisson_solve_with(
    graph: &SparseGraph,
    labels: &LabelSet,
    stopping: Stopping,
    mode: SourceMode,
) -> Result<(NodeMatrix, SolveReport)> {
    labels.check_in_range(graph.node_count())?;
    if labels.distinct_classes() < 2 {
        // Zero source: every iterate is zero.
        let u = Array2::zeros((graph.node_count(), labels.num_classes()));
        return Ok((
            u,
            SolveReport {
                iterations: 0,
                residual: 0.0,
                max_mean_drift: 0.0,
                stopped_by: StopCause::FixedT,
                warnings: vec![SolveWarning::SingleClassLabels],
            },
        ));
    }
    let source = match mode {
        SourceMode::Standard => source_matrix(labels, graph.node_count())?,
        SourceMode::DegreeWeighted => degree_weighted_source(labels, graph.degrees())?,
    };
    poisson_solve_source(graph, &source, stopping)
}

/// Run the recurrence `u <- u + D^{-1}(source - L u)` from `u = 0` for an
/// arbitrary zero-column-sum source. The walker probe starts from the rows
/// where the source is supported.
pub fn poisson_solve_source(
    graph: &SparseGraph,
    source: &NodeMatrix,
    stopping: Stopping,
) -> Result<(NodeMatrix, SolveReport)> {
    let n = graph.node_count();
    let k = source.ncols();
    if source.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: source.nrows(),
        });
    }
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    if let Some(i) = graph.degrees().iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegreeNode(i));
    }
    let scale = source.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    for c in 0..k {
        let sum: f64 = source.column(c).sum();
        if sum.abs() > 1e-8 * (1.0 + scale * n as f64) {
            return Err(Error::UnbalancedSource { channel: c, sum });
        }
    }

    let support: Vec<usize> = (0..n)
        .filter(|&i| source.row(i).iter().any(|&v| v != 0.0))
        .collect();
    if support.is_empty() {
        let (_, resid) = recurrence_step(graph, &Array2::zeros((n, k)), source);
        return Ok((
            Array2::zeros((n, k)),
            SolveReport {
                iterations: 0,
                residual: resid,
                max_mean_drift: 0.0,
                stopped_by: StopCause::FixedT,
                warnings: vec![],
            },
        ));
    }

    let total_degree = graph.total_degree();
    let mut u: NodeMatrix = Array2::zeros((n, k));
    let mut iterations = 0usize;
    let mut max_mean_drift = 0.0f64;
    let mut last_resid;
    let mut warnings = Vec::new();

    let drift = |u: &NodeMatrix, worst: &mut f64| {
        for c in 0..k {
            let s: f64 = u
                .column(c)
                .iter()
                .zip(graph.degrees())
                .map(|(v, d)| v * d)
                .sum();
            *worst = worst.max(s.abs());
        }
    };

    let stopped_by = match stopping {
        Stopping::FixedT(t) => {
            for _ in 0..t {
                let (next, _) = recurrence_step(graph, &u, source);
                u = next;
                iterations += 1;
                drift(&u, &mut max_mean_drift);
            }
            let (_, resid) = recurrence_step(graph, &u, source);
            last_resid = resid;
            StopCause::FixedT
        }
        Stopping::MixingTime { epsilon, cap }
        | Stopping::MixingTimeThenResidual { epsilon, cap, .. } => {
            let residual_target = match stopping {
                Stopping::MixingTimeThenResidual { residual, .. } => Some(residual),
                _ => None,
            };
            let mut probe = MixingProbe::new(graph, &support);
            let mut cause = StopCause::MaxIterations;
            loop {
                let mixed = probe.gap() <= epsilon;
                let (next, resid) = recurrence_step(graph, &u, source);
                last_resid = resid;
                match residual_target {
                    None if mixed => {
                        cause = StopCause::MixingTime;
                        break;
                    }
                    Some(target) if mixed && resid <= target => {
                        cause = StopCause::Residual;
                        break;
                    }
                    _ => {}
                }
                if iterations >= cap {
                    warnings.push(SolveWarning::IterationCapReached);
                    break;
                }
                u = next;
                iterations += 1;
                drift(&u, &mut max_mean_drift);
                if !mixed {
                    probe.step();
                }
            }
            cause
        }
    };

    Ok((
        u,
        SolveReport {
            iterations,
            residual: last_resid,
            max_mean_drift: max_mean_drift / total_degree.max(f64::MIN_POSITIVE),
            stopped_by,
            warnings,
        },
    ))
}

/// One evaluation of the recurrence: returns the next iterate
/// `D^{-1}(B + W u)` and the residual `max |B - L u|` of the *current* one
/// (they coincide up to the degree factor: `B - L u = D (u_next - u)`).
fn recurrence_step(graph: &SparseGraph, u: &NodeMatrix, source: &NodeMatrix) -> (NodeMatrix, f64) {
    let n = graph.node_count();
    let k = u.ncols();
    let u_std = u.as_standard_layout();
    let us = u_std.as_slice().expect("standard layout");
    let src_std = source.as_standard_layout();
    let ss = src_std.as_slice().expect("standard layout");
    let degrees = graph.degrees();
    let mut next = Array2::zeros((n, k));
    let resid = next
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(k)
        .enumerate()
        .map(|(i, row)| {
            let d = degrees[i];
            row.copy_from_slice(&ss[i * k..(i + 1) * k]);
            for (j, w) in graph.row(i) {
                let uj = &us[j * k..(j + 1) * k];
                for c in 0..k {
                    row[c] += w * uj[c];
                }
            }
            let ui = &us[i * k..(i + 1) * k];
            let mut worst = 0.0f64;
            for c in 0..k {
                row[c] /= d;
                worst = worst.max(d * (row[c] - ui[c]).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    (next, resid)
}

/// Walker-distribution probe for the mixing-time stopping rule: advances
/// `p <- W D^{-1} p` from the (mass-normalized) indicator of the start set
/// and reports the max-norm gap to the invariant distribution `d / sum(d)`.
struct MixingProbe<'g> {
    graph: &'g SparseGraph,
    p: Vec<f64>,
    p_inf: Vec<f64>,
}

impl<'g> MixingProbe<'g> {
    fn new(graph: &'g SparseGraph, start: &[usize]) -> Self {
        let n = graph.node_count();
        let mut p = vec![0.0; n];
        // Normalized to unit mass so the limit is exactly p_inf; the raw
        // indicator converges to m * p_inf and would miss the threshold.
        let mass = start.len() as f64;
        for &i in start {
            p[i] = 1.0 / mass;
        }
        let total = graph.total_degree();
        let p_inf = graph.degrees().iter().map(|&d| d / total).collect();
        Self { graph, p, p_inf }
    }

    fn gap(&self) -> f64 {
        self.p
            .iter()
            .zip(self.p_inf.iter())
            .fold(0.0f64, |a, (&x, &y)| a.max((x - y).abs()))
    }

    fn step(&mut self) {
        let q: Vec<f64> = self
            .p
            .iter()
            .zip(self.graph.degrees())
            .map(|(&p, &d)| p / d)
            .collect();
        let mut next = vec![0.0; self.p.len()];
        next.par_iter_mut().enumerate().for_each(|(i, v)| {
            let mut acc = 0.0;
            for (j, w) in self.graph.row(i) {
                acc += w * q[j];
            }
            *v = acc;
        });
        self.p = next;
    }
}

/// Result of the standalone mixing-time computation.
#[derive(Debug, Clone, Copy)]
pub struct MixingTimeResult {
    pub steps: usize,
    /// False when the cap was hit first (e.g. on bipartite graphs, where the
    /// walk is periodic and the probe oscillates forever).
    pub converged: bool,
}

/// Smallest t <= cap with `max |p_t - p_inf| <= epsilon`, where p advances by
/// `p <- W D^{-1} p` from the labeled-node indicator (normalized to unit mass).
pub fn mixing_time_steps(
    graph: &SparseGraph,
    labels: &LabelSet,
    epsilon: f64,
    cap: usize,
) -> Result<MixingTimeResult> {
    labels.check_in_range(graph.node_count())?;
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    if let Some(i) = graph.degrees().iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegreeNode(i));
    }
    let start: Vec<usize> = labels.node_indices().collect();
    let mut probe = MixingProbe::new(graph, &start);
    let mut steps = 0usize;
    while probe.gap() > epsilon {
        if steps >= cap {
            return Ok(MixingTimeResult {
                steps: cap,
                converged: false,
            });
        }
        probe.step();
        steps += 1;
    }
    Ok(MixingTimeResult {
        steps,
        converged: true,
    })
}

/// Scale column j of u by `s_j = b_j / ybar_j` (the class-prior reweighting
/// behind the modified label decision).
pub fn apply_class_prior(
    u: &NodeMatrix,
    ybar: &Array1<f64>,
    prior: &ClassPrior,
) -> Result<NodeMatrix> {
    let k = u.ncols();
    if ybar.len() != k || prior.num_classes() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: ybar.len().min(prior.num_classes()),
        });
    }
    let b = prior.values();
    let mut s = Array1::zeros(k);
    for j in 0..k {
        if ybar[j] > 0.0 {
            s[j] = b[j] / ybar[j];
        } else if b[j] > 0.0 {
            return Err(Error::EmptyClass(j));
        }
    }
    let mut out = u.clone();
    for mut row in out.rows_mut() {
        for (v, &sj) in row.iter_mut().zip(s.iter()) {
            *v *= sj;
        }
    }
    Ok(out)
}

/// Per-node argmax over channels; ties break toward the lowest class index.
pub fn label_decision(u: &NodeMatrix) -> Vec<usize> {
    u.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_v = row[0];
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > best_v {
                    best_v = v;
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Monte Carlo estimate of u_T: walkers released from each labeled node
/// deposit `(y_j - ybar)/d_i` at every node they visit during steps 0..=T.
pub fn monte_carlo_ut(
    graph: &SparseGraph,
    labels: &LabelSet,
    t_steps: usize,
    walkers_per_label: usize,
    seed: u64,
) -> Result<NodeMatrix> {
    monte_carlo_ut_stats(graph, labels, t_steps, walkers_per_label, seed).map(|(u, _)| u)
}

/// Monte Carlo estimate plus the componentwise standard error of the mean.
pub fn monte_carlo_ut_stats(
    graph: &SparseGraph,
    labels: &LabelSet,
    t_steps: usize,
    walkers_per_label: usize,
    seed: u64,
) -> Result<(NodeMatrix, NodeMatrix)> {
    let n = graph.node_count();
    let k = labels.num_classes();
    labels.check_in_range(n)?;
    assert!(walkers_per_label >= 1, "need at least one walker per label");
    for i in labels.node_indices() {
        if graph.degrees()[i] <= 0.0 {
            return Err(Error::ZeroDegreeNode(i));
        }
    }
    let ybar = labels.ybar();
    if labels.distinct_classes() < 2 {
        return Ok((Array2::zeros((n, k)), Array2::zeros((n, k))));
    }

    // Per-node cumulative weights for O(log deg) transition sampling.
    let cumulative: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            graph
                .row(i)
                .map(|(_, w)| {
                    acc += w;
                    acc
                })
                .collect()
        })
        .collect();
    let neighbor_of = |i: usize, r: f64| -> usize {
        let cum = &cumulative[i];
        let slot = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
        graph
            .row(i)
            .nth(slot)
            .map(|(j, _)| j)
            .expect("slot within row")
    };

    // One independent ChaCha stream per (label, walker) pair, so results do
    // not depend on scheduling.
    let per_label: Vec<(Vec<f64>, Vec<f64>)> = labels
        .entries()
        .par_iter()
        .enumerate()
        .map(|(label_pos, &(start, _))| {
            let mut sum = vec![0.0f64; n];
            let mut sumsq = vec![0.0f64; n];
            let mut visits = vec![0.0f64; n];
            let mut touched: Vec<usize> = Vec::new();
            for walker in 0..walkers_per_label {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((label_pos * walkers_per_label + walker) as u64);
                let mut pos = start;
                visits[pos] += 1.0;
                touched.push(pos);
                for _ in 0..t_steps {
                    let r = rng.random_range(0.0..*cumulative[pos].last().unwrap());
                    pos = neighbor_of(pos, r);
                    if visits[pos] == 0.0 {
                        touched.push(pos);
                    }
                    visits[pos] += 1.0;
                }
                for &i in &touched {
                    if visits[i] != 0.0 {
                        let v = visits[i] / graph.degrees()[i];
                        sum[i] += v;
                        sumsq[i] += v * v;
                        visits[i] = 0.0;
                    }
                }
                touched.clear();
            }
            (sum, sumsq)
        })
        .collect();

    let w = walkers_per_label as f64;
    let mut u = Array2::zeros((n, k));
    let mut var = Array2::<f64>::zeros((n, k));
    for (&(_, class), (sum, sumsq)) in labels.entries().iter().zip(per_label.iter()) {
        for i in 0..n {
            let mean = sum[i] / w;
            // Population variance of a single walker / number of walkers.
            let v = (sumsq[i] / w - mean * mean).max(0.0) / w;
            for c in 0..k {
                let inc = if c == class { 1.0 - ybar[c] } else { -ybar[c] };
                u[[i, c]] += mean * inc;
                var[[i, c]] += v * inc * inc;
            }
        }
    }
    Ok((u, var.mapv(f64::sqrt)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use ndarray::array;

    fn path3() -> SparseGraph {
        SparseGraph::from_undirected_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn residual_stopping() -> Stopping {
        Stopping::MixingTimeThenResidual {
            epsilon: 1.0 / 3.0,
            residual: 1e-12,
            cap: 100_000,
        }
    }

    #[test]
    fn source_matrix_path_example() {
        let labels = LabelSet::new(vec![(0, 0), (2, 1)], 2).unwrap();
        let b = source_matrix(&labels, 3).unwrap();
        assert_eq!(b, array![[0.5, -0.5], [0.0, 0.0], [-0.5, 0.5]]);
        // Column sums vanish.
        assert!(b.sum_axis(ndarray::Axis(0)).iter().all(|s| s.abs() < 1e-15));
    }

    #[test]
    fn source_matrix_single_class_is_zero() {
        let labels = LabelSet::new(vec![(0, 1), (2, 1)], 3).unwrap();
        let b = source_matrix(&labels, 4).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degree_weighted_source_example() {
        let labels = LabelSet::new(vec![(0, 0), (1, 1)], 2).unwrap();
        let b = degree_weighted_source(&labels, &[1.0, 3.0]).unwrap();
        assert_eq!(b, array![[0.75, -0.75], [-0.75, 0.75]]);
        assert!(b.sum_axis(ndarray::Axis(0)).iter().all(|s| s.abs() < 1e-15));
    }

    #[test]
    fn two_node_solution() {
        let g = SparseGraph::from_undirected_edges(2, &[(0, 1, 1.0)]).unwrap();
        let labels = LabelSet::new(vec![(0, 0), (1, 1)], 2).unwrap();
        let (u, report) = poisson_solve(&g, &labels, residual_stopping()).unwrap();
        let expect = array![[0.25, -0.25], [-0.25, 0.25]];
        assert!(oracle::max_abs(&(&u - &expect)) < 1e-9);
        assert_eq!(report.stopped_by, StopCause::Residual);
    }

    #[test]
    fn path_solution_matches_hand_solve() {
        let g = path3();
        let labels = LabelSet::new(vec![(0, 0), (2, 1)], 2).unwrap();
        let (u, report) = poisson_solve(&g, &labels, residual_stopping()).unwrap();
        let expect = array![[0.5, -0.5], [0.0, 0.0], [-0.5, 0.5]];
        assert!(oracle::max_abs(&(&u - &expect)) < 1e-9);
        assert!(report.max_mean_drift < 1e-12);
    }

    #[test]
    fn single_class_returns_zero_with_warning() {
        let g = path3();
        let labels = LabelSet::new(vec![(0, 0), (2, 0)], 2).unwrap();
        let (u, report) = poisson_solve(&g, &labels, Stopping::default_mixing(3)).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
        assert!(report.warnings.contains(&SolveWarning::SingleClassLabels));
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = SparseGraph::from_undirected_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let labels = LabelSet::new(vec![(0, 0), (2, 1)], 2).unwrap();
        assert!(matches!(
            poisson_solve(&g, &labels, Stopping::default_mixing(4)),
            Err(Error::DisconnectedGraph)
        ));
    }

    #[test]
    fn recurrence_identity_against_reevaluation() {
        let g = crate::synth::synth_random_connected(30, 2.0, 9);
        let labels = LabelSet::new(vec![(0, 0), (5, 1), (12, 2), (20, 1)], 3).unwrap();
        let source = source_matrix(&labels, 30).unwrap();
        for t in [0usize, 1, 3, 7] {
            let (u_t, _) = poisson_solve(&g, &labels, Stopping::FixedT(t)).unwrap();
            let (u_t1, _) = poisson_solve(&g, &labels, Stopping::FixedT(t + 1)).unwrap();
            // Independent re-evaluation of the step from u_t.
            let lu = crate::calculus::laplacian_apply(&g, &u_t).unwrap();
            let scale = u_t1.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
            for i in 0..30 {
                for c in 0..3 {
                    let step = (source[[i, c]] - lu[[i, c]]) / g.degrees()[i];
                    let diff = (u_t1[[i, c]] - u_t[[i, c]]) - step;
                    assert!(diff.abs() <= 1e-14 * scale, "diff {diff}");
                }
            }
        }
    }

    #[test]
    fn mixing_time_zero_steps_when_already_mixed() {
        // Single node with a self loop: p_0 = (1) equals p_inf exactly.
        let g = SparseGraph::from_undirected_edges(1, &[(0, 0, 2.0)]).unwrap();
        let labels = LabelSet::new(vec![(0, 0)], 1).unwrap();
        let r = mixing_time_steps(&g, &labels, 0.5, 100).unwrap();
        assert_eq!(r.steps, 0);
        assert!(r.converged);
    }

    #[test]
    fn mixing_time_matches_dense_power_iteration() {
        let mut edges = Vec::new();
        for i in 0..3 {
            for j in (i + 1)..3 {
                edges.push((i, j, 1.0));
            }
        }
        let g = SparseGraph::from_undirected_edges(3, &edges).unwrap();
        let labels = LabelSet::new(vec![(0, 0)], 1).unwrap();
        let eps = 0.01;
        let got = mixing_time_steps(&g, &labels, eps, 1000).unwrap();

        // Dense oracle: p <- W D^{-1} p entrywise.
        let mut p = vec![1.0, 0.0, 0.0];
        let p_inf = [1.0 / 3.0; 3];
        let mut steps = 0;
        loop {
            let gap = p
                .iter()
                .zip(p_inf.iter())
                .fold(0.0f64, |a, (&x, &y)| a.max((x - y).abs()));
            if gap <= eps {
                break;
            }
            let mut next = vec![0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        next[i] += 1.0 * p[j] / 2.0;
                    }
                }
            }
            p = next;
            steps += 1;
        }
        assert!(got.converged);
        assert_eq!(got.steps, steps);
        assert!(got.steps > 0);
    }

    #[test]
    fn mixing_time_bipartite_hits_cap() {
        let g = SparseGraph::from_undirected_edges(2, &[(0, 1, 1.0)]).unwrap();
        let labels = LabelSet::new(vec![(0, 0)], 1).unwrap();
        let r = mixing_time_steps(&g, &labels, 0.25, 50).unwrap();
        assert_eq!(r.steps, 50);
        assert!(!r.converged);
    }

    #[test]
    fn solver_cap_warning_on_bipartite() {
        let g = SparseGraph::from_undirected_edges(2, &[(0, 1, 1.0)]).unwrap();
        let labels = LabelSet::new(vec![(0, 0), (1, 1)], 2).unwrap();
        let (_, report) = poisson_solve(
            &g,
            &labels,
            Stopping::MixingTime {
                epsilon: 0.25,
                cap: 40,
            },
        )
        .unwrap();
        assert_eq!(report.iterations, 40);
        assert!(report.warnings.contains(&SolveWarning::IterationCapReached));
        assert_eq!(report.stopped_by, StopCause::MaxIterations);
    }

    #[test]
    fn class_prior_scaling() {
        // Balanced labels and uniform prior leave u unchanged.
        let u = array![[0.4, -0.2], [-0.1, 0.3]];
        let ybar = array![0.5, 0.5];
        let out = apply_class_prior(&u, &ybar, &ClassPrior::uniform(2)).unwrap();
        assert_eq!(out, u);

        // ybar = (2/3, 1/3), b = (1/2, 1/2) scales columns by (3/4, 3/2).
        let ybar = array![2.0 / 3.0, 1.0 / 3.0];
        let out = apply_class_prior(&u, &ybar, &ClassPrior::uniform(2)).unwrap();
        assert!((out[[0, 0]] - 0.4 * 0.75).abs() < 1e-15);
        assert!((out[[0, 1]] - (-0.2 * 1.5)).abs() < 1e-15);
        // Sign pattern survives positive scaling.
        for (a, b) in u.iter().zip(out.iter()) {
            assert_eq!(a.signum(), b.signum());
        }

        let bad_ybar = array![1.0, 0.0];
        assert!(matches!(
            apply_class_prior(&u, &bad_ybar, &ClassPrior::uniform(2)),
            Err(Error::EmptyClass(1))
        ));
    }

    #[test]
    fn label_decision_ties_and_scaling() {
        let u = array![[0.1, 0.9], [0.5, 0.5], [-0.2, -0.4]];
        assert_eq!(label_decision(&u), vec![1, 0, 0]);
        let scaled = &u * 17.5;
        assert_eq!(label_decision(&scaled), label_decision(&u));
    }

    #[test]
    fn path_solution_decisions() {
        let g = path3();
        let labels = LabelSet::new(vec![(0, 0), (2, 1)], 2).unwrap();
        let (u, _) = poisson_solve(&g, &labels, residual_stopping()).unwrap();
        // Node 1 sits at (0, 0): the tie goes to class 0.
        assert_eq!(label_decision(&u), vec![0, 0, 1]);
    }

    #[test]
    fn monte_carlo_t0_is_exact() {
        let g = path3();
        let labels = LabelSet::new(vec![(0, 0), (2, 1)], 2).unwrap();
        for seed in [0u64, 99] {
            let u = monte_carlo_ut(&g, &labels, 0, 10, seed).unwrap();
            let expect = array![[0.5, -0.5], [0.0, 0.0], [-0.5, 0.5]];
            assert!(oracle::max_abs(&(&u - &expect)) < 1e-15);
        }
    }

    #[test]
    fn monte_carlo_single_class_is_zero() {
        let g = path3();
        let labels = LabelSet::new(vec![(0, 0), (2, 0)], 1).unwrap();
        let u = monte_carlo_ut(&g, &labels, 5, 50, 3).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn monte_carlo_matches_iterative_within_three_se() {
        let g = path3();
        let labels = LabelSet::new(vec![(0, 0), (2, 1)], 2).unwrap();
        for t in [1usize, 3] {
            let (exact, _) = poisson_solve(&g, &labels, Stopping::FixedT(t)).unwrap();
            let (est, se) = monte_carlo_ut_stats(&g, &labels, t, 20_000, 42).unwrap();
            for i in 0..3 {
                for c in 0..2 {
                    let err = (est[[i, c]] - exact[[i, c]]).abs();
                    assert!(
                        err <= 3.0 * se[[i, c]] + 1e-12,
                        "t={t} ({i},{c}): err {err} vs se {}",
                        se[[i, c]]
                    );
                }
            }
        }
    }

    #[test]
    fn monte_carlo_deterministic_for_seed() {
        let g = path3();
        let labels = LabelSet::new(vec![(0, 0), (2, 1)], 2).unwrap();
        let a = monte_carlo_ut(&g, &labels, 4, 500, 7).unwrap();
        let b = monte_carlo_ut(&g, &labels, 4, 500, 7).unwrap();
        assert_eq!(a, b);
    }
}
