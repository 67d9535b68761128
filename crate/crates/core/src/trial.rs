//! Randomized-trial harness: label drawing, accuracy scoring, and the
//! trials-by-label-rate experiment loop with CSV reporting.
//!
//! Reproducibility contract: trial t draws its labels from a ChaCha stream
//! seeded with `master_seed + t`, so every algorithm sees identical draws,
//! and reruns with the same flags produce byte-identical CSV regardless of
//! worker-thread count.

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::labels::{ClassPrior, LabelSet};
use crate::laplace;
use crate::mbo::{self, MboParams};
use crate::plap::{self, PlapParams};
use crate::poisson::{self, SolveWarning, SourceMode, Stopping};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Poisson,
    PoissonMbo,
    Laplace,
    LaplaceCentered,
    GeodesicNn,
    PLaplace,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Poisson,
        Algorithm::PoissonMbo,
        Algorithm::Laplace,
        Algorithm::LaplaceCentered,
        Algorithm::GeodesicNn,
        Algorithm::PLaplace,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::Poisson => "poisson",
            Algorithm::PoissonMbo => "poisson_mbo",
            Algorithm::Laplace => "laplace",
            Algorithm::LaplaceCentered => "laplace_centered",
            Algorithm::GeodesicNn => "geodesic_nn",
            Algorithm::PLaplace => "plap",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

/// Where the class prior b comes from.
#[derive(Debug, Clone, Default)]
pub enum PriorMode {
    /// b = 1/k.
    #[default]
    Uniform,
    /// The true class fractions of the ground truth.
    Empirical,
    /// An explicit prior (e.g. loaded from a file).
    Given(ClassPrior),
}

/// How many labels to draw per class.
#[derive(Debug, Clone)]
pub enum CountSpec {
    Uniform(usize),
    PerClass(Vec<usize>),
}

/// Uniform sample without replacement within each class, deterministic for
/// the seed. Every algorithm in a trial must be fed the same draw.
pub fn draw_labels(truth: &[usize], counts: &CountSpec, k: usize, seed: u64) -> Result<LabelSet> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in truth.iter().enumerate() {
        if c >= k {
            return Err(Error::ClassOutOfRange { class: c, k });
        }
        members[c].push(i);
    }
    let count_for = |c: usize| -> usize {
        match counts {
            CountSpec::Uniform(m) => *m,
            CountSpec::PerClass(v) => v.get(c).copied().unwrap_or(0),
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for (c, class_members) in members.iter().enumerate() {
        let want = count_for(c);
        if want == 0 {
            continue;
        }
        if want > class_members.len() {
            return Err(Error::InsufficientClassMembers {
                class: c,
                requested: want,
                available: class_members.len(),
            });
        }
        let picked = rand::seq::index::sample(&mut rng, class_members.len(), want);
        for idx in picked.iter() {
            entries.push((class_members[idx], c));
        }
    }
    LabelSet::new(entries, k)
}

/// Fraction of correct predictions over the nodes *not* in the label set.
pub fn accuracy(pred: &[usize], truth: &[usize], exclude: &LabelSet) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let mut labeled = vec![false; truth.len()];
    for i in exclude.node_indices() {
        if i >= truth.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: truth.len(),
            });
        }
        labeled[i] = true;
    }
    let mut correct = 0usize;
    let mut total = 0usize;
    for i in 0..truth.len() {
        if labeled[i] {
            continue;
        }
        total += 1;
        if pred[i] == truth[i] {
            correct += 1;
        }
    }
    if total == 0 {
        // Everything was labeled; score the labeled set instead of 0/0.
        return Ok(1.0);
    }
    Ok(correct as f64 / total as f64)
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub algo: Algorithm,
    /// Schedule of labels-per-class values (the table columns).
    pub labels_per_class: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub prior: PriorMode,
    /// Mixing-time epsilon; None selects 1/n.
    pub epsilon: Option<f64>,
    /// Iteration cap; None selects 10n.
    pub max_iter: Option<usize>,
    /// Fixed iteration count; set to bypass the mixing-time rule.
    pub fixed_t: Option<usize>,
    pub source: SourceMode,
    pub mbo: MboParams,
    pub plap: PlapParams,
    /// Laplace tolerance; None selects 1e-8 * max degree.
    pub laplace_tol: Option<f64>,
    pub laplace_max_iter: usize,
}

impl TrialConfig {
    pub fn new(algo: Algorithm) -> Self {
        Self {
            algo,
            labels_per_class: vec![1],
            trials: 100,
            seed: 0,
            prior: PriorMode::Uniform,
            epsilon: None,
            max_iter: None,
            fixed_t: None,
            source: SourceMode::Standard,
            mbo: MboParams::default(),
            plap: PlapParams::default(),
            laplace_tol: None,
            laplace_max_iter: 100_000,
        }
    }

    fn stopping(&self, n: usize) -> Stopping {
        match self.fixed_t {
            Some(t) => Stopping::FixedT(t),
            None => Stopping::MixingTime {
                epsilon: self.epsilon.unwrap_or(1.0 / n as f64),
                cap: self.max_iter.unwrap_or(10 * n.max(1)),
            },
        }
    }

    fn prior_for(&self, truth: &[usize], k: usize) -> Result<ClassPrior> {
        match &self.prior {
            PriorMode::Uniform => Ok(ClassPrior::uniform(k)),
            PriorMode::Empirical => ClassPrior::empirical(truth, k),
            PriorMode::Given(p) => {
                if p.num_classes() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        got: p.num_classes(),
                    });
                }
                Ok(p.clone())
            }
        }
    }
}

/// One cell of the report: all trial accuracies at one label rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialCell {
    pub labels_per_class: usize,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation (divisor = number of trials).
    pub std: f64,
    /// Count of solver warnings across trials (iteration caps etc).
    pub warning_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub algo: String,
    pub cells: Vec<TrialCell>,
}

/// Run one algorithm on one label draw; returns predictions and any solver
/// warnings.
pub fn run_algorithm(
    config: &TrialConfig,
    graph: &SparseGraph,
    labels: &LabelSet,
    truth: &[usize],
) -> Result<(Vec<usize>, Vec<SolveWarning>)> {
    let n = graph.node_count();
    let k = labels.num_classes();
    match config.algo {
        Algorithm::Poisson => {
            let (u, report) =
                poisson::poisson_solve_with(graph, labels, config.stopping(n), config.source)?;
            let prior = config.prior_for(truth, k)?;
            let scaled = poisson::apply_class_prior(&u, &labels.ybar(), &prior)?;
            Ok((poisson::label_decision(&scaled), report.warnings))
        }
        Algorithm::PoissonMbo => {
            let prior = config.prior_for(truth, k)?;
            let mut params = config.mbo;
            if params.stopping.is_none() {
                params.stopping = Some(config.stopping(n));
            }
            let (_, classes, report) = mbo::poisson_mbo(graph, labels, &prior, &params)?;
            Ok((classes, report.warnings))
        }
        Algorithm::Laplace | Algorithm::LaplaceCentered => {
            let tol = config
                .laplace_tol
                .unwrap_or_else(|| laplace::laplace_default_tol(graph));
            let sol = laplace::laplace_solve(graph, labels, tol, config.laplace_max_iter)?;
            let warnings = if sol.converged {
                vec![]
            } else {
                vec![SolveWarning::IterationCapReached]
            };
            let classes = if config.algo == Algorithm::Laplace {
                poisson::label_decision(&sol.u)
            } else {
                let shift = laplace::ybar_w(labels, graph.degrees())?;
                laplace::centered_decision(&sol.u, &shift)?
            };
            Ok((classes, warnings))
        }
        Algorithm::GeodesicNn => Ok((laplace::geodesic_nn(graph, labels)?, vec![])),
        Algorithm::PLaplace => {
            let (u, report) = plap::plap_solve(graph, labels, &config.plap)?;
            Ok((poisson::label_decision(&u), report.warnings))
        }
    }
}

/// The full experiment: trials x label-rates for one algorithm. Trials run
/// in parallel; aggregation order is fixed by trial index.
pub fn run_experiment(
    config: &TrialConfig,
    graph: &SparseGraph,
    truth: &[usize],
) -> Result<TrialReport> {
    if truth.len() != graph.node_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.node_count(),
            got: truth.len(),
        });
    }
    if config.trials == 0 {
        return Err(Error::InvalidParameter("trial count must be >= 1".into()));
    }
    let k = truth.iter().map(|&c| c + 1).max().unwrap_or(1);
    let mut cells = Vec::new();
    for &per_class in &config.labels_per_class {
        if per_class == 0 {
            return Err(Error::InvalidParameter(
                "labels-per-class must be >= 1".into(),
            ));
        }
        let results: Result<Vec<(f64, usize)>> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let labels = draw_labels(
                    truth,
                    &CountSpec::Uniform(per_class),
                    k,
                    config.seed + t as u64,
                )?;
                let (pred, warnings) = run_algorithm(config, graph, &labels, truth)?;
                let acc = accuracy(&pred, truth, &labels)?;
                Ok((acc, warnings.len()))
            })
            .collect();
        let results = results?;
        let accuracies: Vec<f64> = results.iter().map(|&(a, _)| a).collect();
        let warning_count = results.iter().map(|&(_, w)| w).sum();
        let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
        let var = accuracies
            .iter()
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / accuracies.len() as f64;
        cells.push(TrialCell {
            labels_per_class: per_class,
            accuracies,
            mean,
            std: var.sqrt(),
            warning_count,
        });
    }
    Ok(TrialReport {
        algo: config.algo.id().to_string(),
        cells,
    })
}

/// Per-trial CSV: header `algo,labels_per_class,trial,accuracy`.
pub fn trials_csv(report: &TrialReport) -> String {
    let mut out = String::from("algo,labels_per_class,trial,accuracy\n");
    for cell in &report.cells {
        for (t, acc) in cell.accuracies.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                report.algo, cell.labels_per_class, t, acc
            ));
        }
    }
    out
}

/// Aggregate CSV: header `algo,labels_per_class,mean,std`.
pub fn aggregate_csv(report: &TrialReport) -> String {
    let mut out = String::from("algo,labels_per_class,mean,std\n");
    for cell in &report.cells {
        out.push_str(&format!(
            "{},{},{},{}\n",
            report.algo, cell.labels_per_class, cell.mean, cell.std
        ));
    }
    out
}

/// Parse a per-trial CSV back into a report (aggregates recomputed).
pub fn parse_trials_csv(text: &str) -> Result<TrialReport> {
    let mut lines = text.lines();
    match lines.next() {
        Some("algo,labels_per_class,trial,accuracy") => {}
        other => {
            return Err(Error::InvalidParameter(format!(
                "bad trials CSV header: {other:?}"
            )))
        }
    }
    let mut algo: Option<String> = None;
    let mut cells: Vec<TrialCell> = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidParameter(format!("bad CSV row: {line:?}")));
        }
        let a = parts[0].to_string();
        match &algo {
            None => algo = Some(a),
            Some(existing) if *existing != a => {
                return Err(Error::InvalidParameter("mixed algorithms in CSV".into()))
            }
            _ => {}
        }
        let lpc: usize = parts[1]
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad labels_per_class {:?}", parts[1])))?;
        let acc: f64 = parts[3]
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad accuracy {:?}", parts[3])))?;
        match cells.last_mut() {
            Some(cell) if cell.labels_per_class == lpc => cell.accuracies.push(acc),
            _ => cells.push(TrialCell {
                labels_per_class: lpc,
                accuracies: vec![acc],
                mean: 0.0,
                std: 0.0,
                warning_count: 0,
            }),
        }
    }
    for cell in cells.iter_mut() {
        let n = cell.accuracies.len() as f64;
        cell.mean = cell.accuracies.iter().sum::<f64>() / n;
        let var = cell
            .accuracies
            .iter()
            .map(|a| (a - cell.mean) * (a - cell.mean))
            .sum::<f64>()
            / n;
        cell.std = var.sqrt();
    }
    Ok(TrialReport {
        algo: algo.ok_or_else(|| Error::InvalidParameter("empty trials CSV".into()))?,
        cells,
    })
}
