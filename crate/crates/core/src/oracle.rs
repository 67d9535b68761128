//! Small-instance ground truth: dense constrained linear solves and
//! eigensolves that the iterative solvers are tested against.
//!
//! The linear algebra here is implemented in-repo (Gaussian elimination with
//! partial pivoting; Householder tridiagonalization plus implicitly shifted
//! QL) so the oracle shares no code path with the sparse iterative solvers.
//! Single-threaded; intended for tests and small runs only.

use crate::calculus::NodeMatrix;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::labels::LabelSet;
use crate::poisson::source_matrix;
use ndarray::{Array1, Array2};

const DENSE_SOLVE_MAX: usize = 5000;
const DENSE_EIGEN_MAX: usize = 2000;

/// Dense unnormalized Laplacian L = D - W.
pub fn dense_laplacian(graph: &SparseGraph) -> Array2<f64> {
    let n = graph.node_count();
    let mut l = Array2::zeros((n, n));
    for (i, j, w) in graph.entries() {
        l[[i, j]] -= w;
        l[[i, i]] += w;
    }
    l
}

/// Solve `L u = source` subject to `sum_i a_i u(x_i) = 0` by restricting the
/// system to the orthogonal complement of `a`. Exact to solver precision.
pub fn dense_poisson_solve_source(
    graph: &SparseGraph,
    source: &NodeMatrix,
    a: &[f64],
) -> Result<NodeMatrix> {
    let n = graph.node_count();
    if n > DENSE_SOLVE_MAX {
        return Err(Error::SizeGuard {
            n,
            max: DENSE_SOLVE_MAX,
        });
    }
    if source.nrows() != n || a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: source.nrows().min(a.len()),
        });
    }
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let l = dense_laplacian(graph);
    let q = orthogonal_complement_basis(a);
    // B = Q^T L Q, rhs = Q^T source
    let lq = l.dot(&q);
    let b = q.t().dot(&lq);
    let rhs = q.t().dot(source);
    let x = lu_solve(b, rhs)?;
    Ok(q.dot(&x))
}

/// Dense constrained solve of the Poisson learning equation:
/// `L u = sum_j (y_j - ybar) delta_ij` with `sum_i a_i u(x_i) = 0`.
pub fn dense_poisson_solve(
    graph: &SparseGraph,
    labels: &LabelSet,
    a: &[f64],
) -> Result<NodeMatrix> {
    let source = source_matrix(labels, graph.node_count())?;
    dense_poisson_solve_source(graph, &source, a)
}

/// Dense pinned-row solve of the Laplace learning problem: labeled rows are
/// exact one-hots, unlabeled rows satisfy `L u = 0`.
pub fn dense_laplace_solve(graph: &SparseGraph, labels: &LabelSet) -> Result<NodeMatrix> {
    let n = graph.node_count();
    if n > DENSE_SOLVE_MAX {
        return Err(Error::SizeGuard {
            n,
            max: DENSE_SOLVE_MAX,
        });
    }
    labels.check_in_range(n)?;
    check_every_component_labeled(graph, labels)?;

    let k = labels.num_classes();
    let mut labeled_class = vec![None; n];
    for &(i, c) in labels.entries() {
        labeled_class[i] = Some(c);
    }
    let unlabeled: Vec<usize> = (0..n).filter(|&i| labeled_class[i].is_none()).collect();
    let mut u = Array2::zeros((n, k));
    for &(i, c) in labels.entries() {
        u[[i, c]] = 1.0;
    }
    if unlabeled.is_empty() {
        return Ok(u);
    }

    // Reduced system on unlabeled nodes: L_uu x = sum_labeled w_il y_l.
    let m = unlabeled.len();
    let mut pos = vec![usize::MAX; n];
    for (p, &i) in unlabeled.iter().enumerate() {
        pos[i] = p;
    }
    let mut sys = Array2::zeros((m, m));
    let mut rhs = Array2::zeros((m, k));
    for (p, &i) in unlabeled.iter().enumerate() {
        for (j, w) in graph.row(i) {
            sys[[p, p]] += w;
            match labeled_class[j] {
                Some(c) => rhs[[p, c]] += w,
                None => {
                    if j != i {
                        sys[[p, pos[j]]] -= w;
                    } else {
                        sys[[p, p]] -= w; // self loop cancels out of L
                    }
                }
            }
        }
    }
    let x = lu_solve(sys, rhs)?;
    for (p, &i) in unlabeled.iter().enumerate() {
        for c in 0..k {
            u[[i, c]] = x[[p, c]];
        }
    }
    Ok(u)
}

fn check_every_component_labeled(graph: &SparseGraph, labels: &LabelSet) -> Result<()> {
    let n = graph.node_count();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = labels.node_indices().collect();
    for &i in &stack {
        seen[i] = true;
    }
    while let Some(i) = stack.pop() {
        for (j, w) in graph.row(i) {
            if w > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    match seen.iter().position(|&s| !s) {
        Some(i) => Err(Error::UnlabeledComponent(i)),
        None => Ok(()),
    }
}

/// Smallest eigenvalue of L restricted to the a-weighted mean-zero subspace
/// `{u : sum_i a_i u_i = 0}`, via dense symmetric eigendecomposition.
/// Zero (up to roundoff) exactly when the graph is disconnected.
pub fn smallest_nonzero_eigenvalue(graph: &SparseGraph, a: &[f64]) -> Result<f64> {
    let n = graph.node_count();
    if n > DENSE_EIGEN_MAX {
        return Err(Error::SizeGuard {
            n,
            max: DENSE_EIGEN_MAX,
        });
    }
    if a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.len(),
        });
    }
    if n < 2 {
        return Err(Error::EmptyInput(n));
    }
    let l = dense_laplacian(graph);
    let q = orthogonal_complement_basis(a);
    let b = q.t().dot(&l.dot(&q));
    let (eigvals, _) = sym_eigen(&b);
    Ok(eigvals[0])
}

/// Orthonormal basis (as columns) of the hyperplane `{v : a . v = 0}`,
/// obtained from the trailing columns of a Householder reflection that maps
/// a/|a| onto the first coordinate axis.
pub fn orthogonal_complement_basis(a: &[f64]) -> Array2<f64> {
    let n = a.len();
    let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm > 0.0, "constraint weight vector must be nonzero");
    let mut v: Vec<f64> = a.iter().map(|&x| x / norm).collect();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let vtv: f64 = v.iter().map(|x| x * x).sum();
    let mut q = Array2::zeros((n, n - 1));
    for i in 0..n {
        for j in 1..n {
            let h = if i == j { 1.0 } else { 0.0 };
            q[[i, j - 1]] = h - 2.0 * v[i] * v[j] / vtv;
        }
    }
    q
}

/// Solve A X = B by Gaussian elimination with partial pivoting. Consumes both
/// operands; fails on (numerically) singular systems.
pub fn lu_solve(mut a: Array2<f64>, mut b: Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    let k = b.ncols();
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[[col, col]].abs();
        for r in (col + 1)..n {
            let v = a[[r, col]].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for c in 0..n {
                a.swap([col, c], [pivot, c]);
            }
            for c in 0..k {
                b.swap([col, c], [pivot, c]);
            }
        }
        let diag = a[[col, col]];
        for r in (col + 1)..n {
            let factor = a[[r, col]] / diag;
            if factor == 0.0 {
                continue;
            }
            a[[r, col]] = 0.0;
            for c in (col + 1)..n {
                let v = a[[col, c]];
                a[[r, c]] -= factor * v;
            }
            for c in 0..k {
                let v = b[[col, c]];
                b[[r, c]] -= factor * v;
            }
        }
    }
    // Back substitution.
    for col in (0..n).rev() {
        let diag = a[[col, col]];
        for c in 0..k {
            let mut acc = b[[col, c]];
            for j in (col + 1)..n {
                acc -= a[[col, j]] * b[[j, c]];
            }
            b[[col, c]] = acc / diag;
        }
    }
    Ok(b)
}

/// Eigendecomposition of a symmetric matrix: Householder reduction to
/// tridiagonal form followed by the implicitly shifted QL algorithm.
/// Returns eigenvalues in ascending order with matching eigenvector columns.
pub fn sym_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    let mut z = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut z, &mut d, &mut e);
    (d, z)
}

/// Householder reduction of a real symmetric matrix to tridiagonal form.
fn tred2(z: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = z[[n - 1, j]];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = z[[i - 1, j]];
                z[[i, j]] = 0.0;
                z[[j, i]] = 0.0;
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                z[[j, i]] = f;
                let mut g = e[j] + z[[j, j]] * f;
                for k in (j + 1)..i {
                    g += z[[k, j]] * d[k];
                    e[k] += z[[k, j]] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    z[[k, j]] -= upd;
                }
                d[j] = z[[i - 1, j]];
                z[[i, j]] = 0.0;
            }
        }
        d[i] = h;
    }
    // Accumulate transformations.
    for i in 0..(n - 1) {
        z[[n - 1, i]] = z[[i, i]];
        z[[i, i]] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = z[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += z[[k, i + 1]] * z[[k, j]];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    z[[k, j]] -= upd;
                }
            }
        }
        for k in 0..=i {
            z[[k, i + 1]] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = z[[n - 1, j]];
        z[[n - 1, j]] = 0.0;
    }
    z[[n - 1, n - 1]] = 1.0;
    e[0] = 0.0;
}

/// Implicitly shifted QL iteration on a symmetric tridiagonal matrix, with
/// eigenvector accumulation and a final ascending sort.
#[allow(unused_assignments)] // faithful port of the classic loop structure
fn tql2(z: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                // Implicit shift from the 2x2 leading block.
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = z[[k, i + 1]];
                        z[[k, i + 1]] = s * z[[k, i]] + c * h;
                        z[[k, i]] = c * z[[k, i]] - s * h;
                    }
                    if i == l {
                        p = -s * s2 * c3 * el1 * e[l] / dl1;
                    }
                }
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Sort eigenvalues ascending, permuting eigenvector columns with them.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d.swap(i, k);
            for j in 0..n {
                z.swap([j, i], [j, k]);
            }
        }
    }
}

#[allow(dead_code)]
pub(crate) fn max_abs(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}
