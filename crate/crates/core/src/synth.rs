//! Synthetic datasets for tests and experiments.

use crate::graph::{FeatureMatrix, SparseGraph};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// n independent uniform points on the unit square.
pub fn synth_uniform_square(n: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Array2::zeros((n, 2));
    for v in f.iter_mut() {
        *v = rng.random_range(0.0..1.0);
    }
    f
}

/// Gaussian blobs (unit variance) with centers spaced `separation` apart
/// along the first axis; returns features and the true class per point.
pub fn synth_blobs(
    classes: usize,
    per_class: usize,
    separation: f64,
    dim: usize,
    seed: u64,
) -> (FeatureMatrix, Vec<usize>) {
    let n = classes * per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Array2::zeros((n, dim));
    let mut truth = Vec::with_capacity(n);
    for c in 0..classes {
        for p in 0..per_class {
            let row = c * per_class + p;
            truth.push(c);
            for d in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                f[[row, d]] = if d == 0 {
                    c as f64 * separation + noise
                } else {
                    noise
                };
            }
        }
    }
    (f, truth)
}

/// Two unit-weight cliques of the given size joined by one weak bridge
/// (weight 1e-3) so the graph stays connected.
pub fn synth_two_cliques(size: usize) -> (SparseGraph, Vec<usize>) {
    let n = 2 * size;
    let mut edges = Vec::new();
    for block in 0..2 {
        let off = block * size;
        for i in 0..size {
            for j in (i + 1)..size {
                edges.push((off + i, off + j, 1.0));
            }
        }
    }
    edges.push((0, size, 1e-3));
    let g = SparseGraph::from_undirected_edges(n, &edges).expect("valid clique edges");
    let truth = (0..n).map(|i| usize::from(i >= size)).collect();
    (g, truth)
}

/// Random connected weighted graph: a random spanning tree plus roughly
/// `extra_per_node * n` additional random edges, weights in [0.2, 2).
pub fn synth_random_connected(n: usize, extra_per_node: f64, seed: u64) -> SparseGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = rng.random_range(0..i);
        edges.push((parent, i, rng.random_range(0.2..2.0)));
    }
    let extra = (extra_per_node * n as f64) as usize;
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.push((i.min(j), i.max(j), rng.random_range(0.2..2.0)));
        }
    }
    SparseGraph::from_undirected_edges(n, &edges).expect("valid random edges")
}
