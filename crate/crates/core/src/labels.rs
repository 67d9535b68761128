//! Training labels and class priors.

use crate::error::{Error, Result};
use ndarray::Array1;

/// A set of labeled nodes: distinct node indices with class ids in `0..k`.
#[derive(Debug, Clone)]
pub struct LabelSet {
    entries: Vec<(usize, usize)>,
    k: usize,
}

impl LabelSet {
    /// `entries` are (node index, class id) pairs; `k` is the number of
    /// classes. Indices must be distinct and every class id must be `< k`.
    pub fn new(mut entries: Vec<(usize, usize)>, k: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NoLabels);
        }
        for &(_, c) in &entries {
            if c >= k {
                return Err(Error::ClassOutOfRange { class: c, k });
            }
        }
        entries.sort_by_key(|&(i, _)| i);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateLabel(pair[0].0));
            }
        }
        Ok(Self { entries, k })
    }

    /// Build from pairs, inferring `k` as the largest class id plus one.
    pub fn from_pairs(entries: Vec<(usize, usize)>) -> Result<Self> {
        let k = entries.iter().map(|&(_, c)| c + 1).max().unwrap_or(0);
        Self::new(entries, k.max(1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    /// (node index, class id) pairs, sorted by node index.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn node_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    /// Average one-hot label vector, ybar = (1/m) sum_j y_j.
    pub fn ybar(&self) -> Array1<f64> {
        let mut y = Array1::zeros(self.k);
        for &(_, c) in &self.entries {
            y[c] += 1.0;
        }
        y / self.entries.len() as f64
    }

    /// Number of distinct classes actually present.
    pub fn distinct_classes(&self) -> usize {
        let mut seen = vec![false; self.k];
        for &(_, c) in &self.entries {
            seen[c] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// Largest labeled node index, for validating against a graph size.
    pub fn max_index(&self) -> usize {
        self.entries.last().map(|&(i, _)| i).unwrap_or(0)
    }

    pub fn check_in_range(&self, n: usize) -> Result<()> {
        let index = self.max_index();
        if index >= n {
            return Err(Error::IndexOutOfRange { index, n });
        }
        Ok(())
    }
}

/// Prior class proportions b: nonnegative entries summing to 1.
#[derive(Debug, Clone)]
pub struct ClassPrior {
    b: Array1<f64>,
}

impl ClassPrior {
    pub fn new(b: Array1<f64>) -> Result<Self> {
        let sum: f64 = b.sum();
        if b.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPrior(sum));
        }
        Ok(Self { b })
    }

    /// Uniform prior 1/k.
    pub fn uniform(k: usize) -> Self {
        Self {
            b: Array1::from_elem(k, 1.0 / k as f64),
        }
    }

    /// Empirical class fractions of a ground-truth class vector.
    pub fn empirical(truth: &[usize], k: usize) -> Result<Self> {
        let mut b = Array1::zeros(k);
        for &c in truth {
            if c >= k {
                return Err(Error::ClassOutOfRange { class: c, k });
            }
            b[c] += 1.0;
        }
        b /= truth.len() as f64;
        Ok(Self { b })
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn num_classes(&self) -> usize {
        self.b.len()
    }
}
