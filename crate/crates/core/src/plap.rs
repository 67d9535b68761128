//! The l^p generalization of the gradient-regularized variational problem:
//! minimize I_p(u) = (1/p)||grad u||_p^p - mu * sum_j (y_j - ybar) . u(x_j)
//! over functions with zero weighted mean, solved by projected gradient
//! descent with a backtracking line search.

use crate::calculus::{self, EdgeField, NodeMatrix};
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::labels::LabelSet;
use crate::poisson::{SolveReport, SolveWarning, StopCause};
use ndarray::Array2;

/// Which weight vector defines the zero-mean constraint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MeanWeights {
    /// a = degrees, matching the constraint of the p = 2 Poisson problem.
    #[default]
    Degree,
    Uniform,
}

#[derive(Debug, Clone, Copy)]
pub struct PlapParams {
    pub p: f64,
    pub mu: f64,
    /// Initial descent step; None selects 1/max_i d_i.
    pub step: Option<f64>,
    pub max_iter: usize,
    /// Stop when the Euler-Lagrange residual max-norm falls below this.
    pub grad_tol: f64,
    pub weights: MeanWeights,
}

impl Default for PlapParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            mu: 1.0,
            step: None,
            max_iter: 200_000,
            grad_tol: 1e-8,
            weights: MeanWeights::Degree,
        }
    }
}

impl PlapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(Error::InvalidP(self.p));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::InvalidParameter("mu must be nonnegative".into()));
        }
        if let Some(s) = self.step {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter("step must be positive".into()));
            }
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter("grad_tol must be positive".into()));
        }
        Ok(())
    }
}

/// The p-flux |grad u|^{p-2} grad u, with zero flux on zero-gradient edges
/// (the continuous limit of the flux, which keeps p < 2 well defined).
fn p_flux(graph: &SparseGraph, u: &NodeMatrix, p: f64) -> Result<EdgeField> {
    let grad = calculus::gradient(graph, u)?;
    if p == 2.0 {
        return Ok(grad);
    }
    let mut flux = grad;
    for mut row in flux.values_mut().rows_mut() {
        let mag2: f64 = row.iter().map(|v| v * v).sum();
        if mag2 == 0.0 {
            continue;
        }
        let coef = mag2.sqrt().powf(p - 2.0);
        for v in row.iter_mut() {
            *v *= coef;
        }
    }
    Ok(flux)
}

/// Euler-Lagrange residual of I_p: `-div(|grad u|^{p-2} grad u) - mu * source`,
/// where the source places `y_j - ybar` at each labeled node. At p = 2 this
/// reduces to `L u - mu * source`.
pub fn plap_gradient(
    graph: &SparseGraph,
    u: &NodeMatrix,
    labels: &LabelSet,
    p: f64,
    mu: f64,
) -> Result<NodeMatrix> {
    if !(p > 1.0) {
        return Err(Error::InvalidP(p));
    }
    let source = crate::poisson::source_matrix(labels, graph.node_count())?;
    let flux = p_flux(graph, u, p)?;
    let mut g = calculus::divergence(graph, &flux)?;
    g.zip_mut_with(&source, |gv, &sv| *gv = -*gv - mu * sv);
    Ok(g)
}

/// Subtract the a-weighted mean from every channel.
fn center(u: &mut NodeMatrix, a: &[f64]) {
    let mean = calculus::weighted_mean(u, a).expect("validated dimensions");
    for mut row in u.rows_mut() {
        for (v, &m) in row.iter_mut().zip(mean.iter()) {
            *v -= m;
        }
    }
}

fn max_abs(u: &NodeMatrix) -> f64 {
    u.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Projected gradient descent on I_p over the a-weighted mean-zero subspace.
/// Each step subtracts the weighted mean, the line search halves the step
/// until the energy strictly decreases, and the accepted step size carries
/// over (doubled) to the next iteration. Stops at `grad_tol` on the residual
/// max-norm or at `max_iter` with a warning.
pub fn plap_solve(
    graph: &SparseGraph,
    labels: &LabelSet,
    params: &PlapParams,
) -> Result<(NodeMatrix, SolveReport)> {
    params.validate()?;
    let n = graph.node_count();
    labels.check_in_range(n)?;
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let k = labels.num_classes();
    let p = params.p;
    let mu = params.mu;
    let a: Vec<f64> = match params.weights {
        MeanWeights::Degree => graph.degrees().to_vec(),
        MeanWeights::Uniform => vec![1.0; n],
    };

    let mut u: NodeMatrix = Array2::zeros((n, k));
    let mut energy = calculus::poisson_energy(graph, &u, labels, p, mu)?;
    let initial_step = params.step.unwrap_or_else(|| 1.0 / graph.max_degree());
    let mut step = initial_step;
    let mut iterations = 0usize;
    let mut residual;
    let mut drift = 0.0f64;
    loop {
        let grad = plap_gradient(graph, &u, labels, p, mu)?;
        residual = max_abs(&grad);
        if residual <= params.grad_tol {
            return Ok((
                u,
                SolveReport {
                    iterations,
                    residual,
                    max_mean_drift: drift,
                    stopped_by: StopCause::Residual,
                    warnings: vec![],
                },
            ));
        }
        if iterations >= params.max_iter {
            return Ok((
                u,
                SolveReport {
                    iterations,
                    residual,
                    max_mean_drift: drift,
                    stopped_by: StopCause::MaxIterations,
                    warnings: vec![SolveWarning::IterationCapReached],
                },
            ));
        }
        // Backtracking: halve until the energy strictly decreases.
        let mut accepted = false;
        while step > 1e-300 {
            let mut trial = u.clone();
            trial.scaled_add(-step, &grad);
            center(&mut trial, &a);
            let trial_energy = calculus::poisson_energy(graph, &trial, labels, p, mu)?;
            if trial_energy < energy {
                u = trial;
                energy = trial_energy;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No descent direction at floating-point resolution.
            return Ok((
                u,
                SolveReport {
                    iterations,
                    residual,
                    max_mean_drift: drift,
                    stopped_by: StopCause::MaxIterations,
                    warnings: vec![SolveWarning::IterationCapReached],
                },
            ));
        }
        iterations += 1;
        let mean = calculus::weighted_mean(&u, &a)?;
        drift = drift.max(mean.iter().fold(0.0f64, |m, &v| m.max(v.abs())));
        step *= 2.0;
    }
}

/// Optimal constant in `lambda ||u - (u)_{a,X}||_2 <= ||grad u||_2` on a
/// connected graph: the square root of the smallest eigenvalue of L
/// restricted to the a-weighted mean-zero subspace. Computed densely.
pub fn poincare_constant_p2(graph: &SparseGraph, a: &[f64]) -> Result<f64> {
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let lambda_sq = crate::oracle::smallest_nonzero_eigenvalue(graph, a)?;
    if lambda_sq <= 1e-12 * graph.max_degree().max(1.0) {
        return Err(Error::DisconnectedGraph);
    }
    Ok(lambda_sq.sqrt())
}
