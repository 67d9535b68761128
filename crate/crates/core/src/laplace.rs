//! Laplace learning (harmonic extension of the labels), the centered label
//! decision, and the geodesic nearest-neighbor baseline.

use crate::calculus::NodeMatrix;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::labels::LabelSet;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Harmonic extension of the labels: labeled rows pinned to their one-hot
/// vectors, unlabeled rows satisfying `L u = 0` up to the residual.
#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub u: NodeMatrix,
    /// max over unlabeled nodes of |L u(x_i)| / d_i at exit.
    pub residual: f64,
    pub iterations: usize,
    /// False when max_iter was reached before the tolerance.
    pub converged: bool,
}

/// Default Jacobi tolerance: 1e-8 times the maximum degree.
pub fn laplace_default_tol(graph: &SparseGraph) -> f64 {
    1e-8 * graph.max_degree()
}

/// Solve the Laplace learning problem by Jacobi sweeps: repeatedly replace
/// each unlabeled value with the weighted average of its neighbors. Stops
/// when every unlabeled node satisfies `|L u(x_i)| <= tol * d_i`.
///
/// Unlabeled rows start at the degree-weighted label mean, the constant the
/// solution concentrates around at low label rates; the fixed point is
/// unique, so the starting point affects only the iteration count.
pub fn laplace_solve(
    graph: &SparseGraph,
    labels: &LabelSet,
    tol: f64,
    max_iter: usize,
) -> Result<HarmonicSolution> {
    let n = graph.node_count();
    let k = labels.num_classes();
    labels.check_in_range(n)?;
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }

    let mut labeled = vec![false; n];
    let mut u: NodeMatrix = Array2::zeros((n, k));
    for &(i, c) in labels.entries() {
        labeled[i] = true;
        u[[i, c]] = 1.0;
    }
    let unlabeled_count = n - labels.len();
    if unlabeled_count == 0 {
        return Ok(HarmonicSolution {
            u,
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    if let Some(i) = (0..n).find(|&i| !labeled[i] && graph.degrees()[i] <= 0.0) {
        return Err(Error::ZeroDegreeNode(i));
    }
    let ybar_w = ybar_w(labels, graph.degrees())?;
    for i in 0..n {
        if !labeled[i] {
            for c in 0..k {
                u[[i, c]] = ybar_w[c];
            }
        }
    }

    let mut iterations = 0usize;
    loop {
        let (next, resid) = jacobi_sweep(graph, &u, &labeled);
        if resid <= tol {
            return Ok(HarmonicSolution {
                u,
                residual: resid,
                iterations,
                converged: true,
            });
        }
        if iterations >= max_iter {
            return Ok(HarmonicSolution {
                u,
                residual: resid,
                iterations,
                converged: false,
            });
        }
        u = next;
        iterations += 1;
    }
}

/// One Jacobi sweep. Returns the next iterate and the residual
/// `max |L u(x_i)| / d_i` of the *current* one over unlabeled nodes (the
/// update magnitude equals exactly that quantity).
fn jacobi_sweep(graph: &SparseGraph, u: &NodeMatrix, labeled: &[bool]) -> (NodeMatrix, f64) {
    let n = graph.node_count();
    let k = u.ncols();
    let u_std = u.as_standard_layout();
    let us = u_std.as_slice().expect("standard layout");
    let degrees = graph.degrees();
    let mut next = Array2::zeros((n, k));
    let resid = next
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(k)
        .enumerate()
        .map(|(i, row)| {
            let ui = &us[i * k..(i + 1) * k];
            if labeled[i] {
                row.copy_from_slice(ui);
                return 0.0;
            }
            for (j, w) in graph.row(i) {
                let uj = &us[j * k..(j + 1) * k];
                for c in 0..k {
                    row[c] += w * uj[c];
                }
            }
            let d = degrees[i];
            let mut worst = 0.0f64;
            for c in 0..k {
                row[c] /= d;
                worst = worst.max((row[c] - ui[c]).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    (next, resid)
}

/// Degree-weighted label mean `ybar_w = sum_i d_i y_i / sum_j d_j` over the
/// labeled nodes; the constant that Laplace learning concentrates around at
/// low label rates.
pub fn ybar_w(labels: &LabelSet, degrees: &[f64]) -> Result<Array1<f64>> {
    labels.check_in_range(degrees.len())?;
    let mut acc = Array1::zeros(labels.num_classes());
    let mut total = 0.0;
    for &(i, c) in labels.entries() {
        let d = degrees[i];
        if d <= 0.0 {
            return Err(Error::ZeroDegreeNode(i));
        }
        acc[c] += d;
        total += d;
    }
    Ok(acc / total)
}

/// Centered label decision: argmax_j (u_j(x_i) - ybar_w_j), ties toward the
/// lower class index. Subtracting the shared constant removes the shift bias
/// of the harmonic solution.
pub fn centered_decision(u: &NodeMatrix, ybar_w: &Array1<f64>) -> Result<Vec<usize>> {
    if u.ncols() != ybar_w.len() {
        return Err(Error::DimensionMismatch {
            expected: u.ncols(),
            got: ybar_w.len(),
        });
    }
    Ok(crate::poisson::label_decision(&(u - &ybar_w.view().insert_axis(ndarray::Axis(0)))))
}

#[derive(PartialEq)]
struct QueueItem {
    dist: f64,
    source: usize,
    node: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest
        // (dist, source) pair first.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.source.cmp(&self.source))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Assign every node the class of its nearest labeled vertex under the graph
/// geodesic distance with edge lengths 1/w. Distance ties resolve toward the
/// lower source node index.
pub fn geodesic_nn(graph: &SparseGraph, labels: &LabelSet) -> Result<Vec<usize>> {
    let n = graph.node_count();
    labels.check_in_range(n)?;
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let mut class_of = vec![usize::MAX; n];
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n];
    let mut heap = BinaryHeap::new();
    for &(i, c) in labels.entries() {
        best[i] = (0.0, i);
        class_of[i] = c;
        heap.push(QueueItem {
            dist: 0.0,
            source: i,
            node: i,
        });
    }
    let mut settled = vec![false; n];
    let mut out = vec![0usize; n];
    while let Some(QueueItem { dist, source, node }) = heap.pop() {
        if settled[node] {
            continue;
        }
        if (dist, source) != best[node] {
            continue; // stale entry
        }
        settled[node] = true;
        out[node] = class_of[source];
        for (j, w) in graph.row(node) {
            if w <= 0.0 || settled[j] {
                continue;
            }
            let cand = (dist + 1.0 / w, source);
            if cand.0 < best[j].0 || (cand.0 == best[j].0 && cand.1 < best[j].1) {
                best[j] = cand;
                heap.push(QueueItem {
                    dist: cand.0,
                    source,
                    node: j,
                });
            }
        }
    }
    Ok(out)
}
