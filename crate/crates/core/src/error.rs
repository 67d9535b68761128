//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("at least 2 points are required, got {0}")]
    EmptyInput(usize),

    #[error("k = {k} neighbors requested but only {n} points available (need k < n)")]
    KTooLarge { k: usize, n: usize },

    #[error("point {0} has zero distance to its k-th nearest neighbor; pass KnnParams::degenerate_fallback to substitute the smallest positive neighbor distance")]
    DegenerateScale(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("edge weight {weight} at ({i}, {j}) is negative or not finite")]
    InvalidWeight { i: usize, j: usize, weight: f64 },

    #[error("edge ({i}, {j}) has no matching reverse entry of identical weight")]
    AsymmetricEdge { i: usize, j: usize },

    #[error("weight vector sums to {0}, must be positive")]
    NonpositiveWeightSum(f64),

    #[error("p = {0} is invalid: the gradient energy requires p > 1 (at p = 1 the variational problem can be unbounded below and minimizers may not exist)")]
    InvalidP(f64),

    #[error("tau = {0} is invalid, must be positive")]
    InvalidTau(f64),

    #[error("graph is disconnected")]
    DisconnectedGraph,

    #[error("node {0} has zero degree")]
    ZeroDegreeNode(usize),

    #[error("label set is empty")]
    NoLabels,

    #[error("duplicate label for node {0}")]
    DuplicateLabel(usize),

    #[error("class id {class} out of range for {k} classes")]
    ClassOutOfRange { class: usize, k: usize },

    #[error("class {0} has positive prior mass but no training labels")]
    EmptyClass(usize),

    #[error("class prior entries must be nonnegative and sum to 1, got sum {0}")]
    InvalidPrior(f64),

    #[error("problem size {n} exceeds the dense-solver guard of {max}")]
    SizeGuard { n: usize, max: usize },

    #[error("connected component containing node {0} has no label")]
    UnlabeledComponent(usize),

    #[error("class {class} has {available} members, cannot draw {requested}")]
    InsufficientClassMembers {
        class: usize,
        requested: usize,
        available: usize,
    },

    #[error("source term is not balanced: channel {channel} sums to {sum}, the iteration only converges for zero-sum sources")]
    UnbalancedSource { channel: usize, sum: f64 },

    #[error("dense linear system is singular or numerically rank-deficient")]
    SingularSystem,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {msg}")]
    FileFormat { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
