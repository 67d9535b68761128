//! Graph-based semi-supervised learning at very low label rates.
//!
//! The core method treats training labels as point sources and sinks of a
//! graph Poisson equation instead of hard constraints, which stays stable
//! when only a handful of labels per class are available. On top of it sit a
//! graph-cut refinement (Poisson MBO), the classical harmonic-extension
//! baseline with a centered decision rule, a geodesic nearest-neighbor
//! baseline, and an l^p generalization of the variational problem.
//!
//! Crate layout:
//! - [`graph`]: sparse symmetric weighted graphs, Gaussian k-NN construction
//! - [`calculus`]: gradient/divergence/Laplacian, norms, means and energies
//! - [`labels`]: label sets and class priors
//! - [`poisson`]: the Poisson solver with its mixing-time stopping rule,
//!   class-prior reweighting and the Monte Carlo random-walk oracle
//! - [`laplace`]: harmonic extension, centered decision, geodesic 1-NN
//! - [`mbo`]: volume-constrained MBO refinement
//! - [`plap`]: p-Laplace solver and the Poincare constant
//! - [`oracle`]: dense small-instance ground truth used by the tests
//! - [`synth`], [`trial`], [`io`]: datasets, the experiment harness, files

pub mod calculus;
pub mod error;
pub mod graph;
pub mod io;
pub mod labels;
pub mod laplace;
pub mod mbo;
pub mod oracle;
pub mod plap;
pub mod poisson;
pub mod synth;
pub mod trial;

pub use calculus::{EdgeField, NodeMatrix};
pub use error::{Error, Result};
pub use graph::{build_knn_graph, FeatureMatrix, KnnParams, SparseGraph};
pub use labels::{ClassPrior, LabelSet};
pub use laplace::HarmonicSolution;
pub use mbo::MboParams;
pub use plap::PlapParams;
pub use poisson::{SolveReport, SourceMode, StopCause, Stopping};
pub use trial::{Algorithm, CountSpec, PriorMode, TrialConfig, TrialReport};
