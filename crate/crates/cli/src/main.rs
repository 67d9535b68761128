//! Command-line harness: graph construction, randomized trials and
//! synthetic dataset generation.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use graphssl::trial::{self, PriorMode, TrialConfig};
use graphssl::{io, synth, Algorithm, ClassPrior, KnnParams, MboParams, PlapParams, SourceMode};
use ndarray::Array1;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "graphssl",
    about = "Graph-based semi-supervised learning at low label rates",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a Gaussian-weight k-nearest-neighbor graph from a feature file.
    BuildGraph(BuildGraphArgs),
    /// Run randomized labeled-set trials of one algorithm on a graph.
    Run(RunArgs),
    /// Generate synthetic datasets.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureFormat {
    Csv,
    Bin,
}

#[derive(Args)]
struct BuildGraphArgs {
    /// Feature file (one row per point).
    #[arg(long)]
    features: PathBuf,
    /// Number of nearest neighbors.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Feature file format.
    #[arg(long, value_enum, default_value_t = FeatureFormat::Csv)]
    format: FeatureFormat,
    /// Keep self-loop weights instead of zeroing the diagonal.
    #[arg(long)]
    keep_diagonal: bool,
    /// Substitute the smallest positive neighbor distance when a point's
    /// k-th neighbor distance is zero (duplicate points).
    #[arg(long)]
    degenerate_fallback: bool,
    /// Output graph file (binary).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Poisson,
    PoissonMbo,
    Laplace,
    LaplaceCentered,
    GeodesicNn,
    Plap,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Poisson => Algorithm::Poisson,
            AlgoArg::PoissonMbo => Algorithm::PoissonMbo,
            AlgoArg::Laplace => Algorithm::Laplace,
            AlgoArg::LaplaceCentered => Algorithm::LaplaceCentered,
            AlgoArg::GeodesicNn => Algorithm::GeodesicNn,
            AlgoArg::Plap => Algorithm::PLaplace,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Uniform,
    Empirical,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    Mixing,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Standard,
    Degree,
}

#[derive(Args)]
struct RunArgs {
    /// Graph file produced by build-graph (or synth cliques).
    #[arg(long)]
    graph: PathBuf,
    /// Ground-truth class file: one class id per line.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum)]
    algo: AlgoArg,
    /// Comma-separated schedule of labels per class, e.g. 1,2,3,4,5.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    labels_per_class: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = PriorArg::Uniform)]
    prior: PriorArg,
    /// Prior file (one nonnegative weight per line, summing to 1); used with
    /// --prior file.
    #[arg(long)]
    prior_file: Option<PathBuf>,
    /// Stopping rule of the Poisson iteration.
    #[arg(long, value_enum, default_value_t = StopArg::Mixing)]
    stop: StopArg,
    /// Mixing-time threshold (default 1/n).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Iteration cap (default 10n).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Iteration count for --stop fixed.
    #[arg(long, default_value_t = 500)]
    fixed_t: usize,
    /// Source construction for Poisson learning.
    #[arg(long, value_enum, default_value_t = SourceArg::Standard)]
    source: SourceArg,
    // MBO parameters.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 40)]
    n_inner: usize,
    #[arg(long, default_value_t = 20)]
    n_outer: usize,
    /// Descent step (default 1/max degree).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    dtau: f64,
    #[arg(long, default_value_t = 0.5)]
    s_min: f64,
    #[arg(long, default_value_t = 2.0)]
    s_max: f64,
    #[arg(long, default_value_t = 100)]
    s_iters: usize,
    // p-Laplace parameters.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 200_000)]
    plap_max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    plap_tol: f64,
    // Laplace parameters.
    #[arg(long)]
    laplace_tol: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    laplace_max_iter: usize,
    /// Per-trial results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Aggregate CSV (default: <out stem>_aggregate.csv).
    #[arg(long)]
    agg_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Uniform points on the unit square.
    Square {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gaussian blobs with centers spaced `separation` apart.
    Blobs {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = 5.0)]
        separation: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_out: PathBuf,
    },
    /// Two unit-weight cliques joined by a weak bridge; writes a graph file.
    Cliques {
        #[arg(long)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_out: PathBuf,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::BuildGraph(args) => build_graph(args),
        Command::Run(args) => run_trials(args),
        Command::Synth(cmd) => synth_cmd(cmd),
    }
}

fn build_graph(args: BuildGraphArgs) -> anyhow::Result<()> {
    let features = match args.format {
        FeatureFormat::Csv => io::read_features_csv(&args.features),
        FeatureFormat::Bin => io::read_features_bin(&args.features),
    }
    .with_context(|| format!("reading {}", args.features.display()))?;
    let params = KnnParams {
        zero_diagonal: !args.keep_diagonal,
        degenerate_fallback: args.degenerate_fallback,
    };
    let graph = graphssl::build_knn_graph(&features, args.k, params)?;
    if !graph.is_connected() {
        eprintln!(
            "warning: graph is not connected; solvers will reject it \
             (try a larger --k)"
        );
    }
    io::write_graph(&args.out, &graph)?;
    println!(
        "wrote {}: {} nodes, {} undirected edges",
        args.out.display(),
        graph.node_count(),
        graph.edge_count()
    );
    Ok(())
}

fn read_prior_file(path: &Path) -> anyhow::Result<ClassPrior> {
    let text = std::fs::read_to_string(path)?;
    let values: Vec<f64> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<f64>().with_context(|| format!("bad prior entry {l:?}")))
        .collect::<anyhow::Result<_>>()?;
    Ok(ClassPrior::new(Array1::from(values))?)
}

fn run_trials(args: RunArgs) -> anyhow::Result<()> {
    let graph = io::read_graph(&args.graph)
        .with_context(|| format!("reading {}", args.graph.display()))?;
    let truth = io::read_truth(&args.truth)
        .with_context(|| format!("reading {}", args.truth.display()))?;

    let mut config = TrialConfig::new(args.algo.into());
    config.labels_per_class = args.labels_per_class.clone();
    config.trials = args.trials;
    config.seed = args.seed;
    config.prior = match args.prior {
        PriorArg::Uniform => PriorMode::Uniform,
        PriorArg::Empirical => PriorMode::Empirical,
        PriorArg::File => {
            let path = args
                .prior_file
                .as_ref()
                .context("--prior file requires --prior-file")?;
            PriorMode::Given(read_prior_file(path)?)
        }
    };
    config.epsilon = args.epsilon;
    config.max_iter = args.max_iter;
    config.fixed_t = match args.stop {
        StopArg::Mixing => None,
        StopArg::Fixed => Some(args.fixed_t),
    };
    config.source = match args.source {
        SourceArg::Standard => SourceMode::Standard,
        SourceArg::Degree => SourceMode::DegreeWeighted,
    };
    config.mbo = MboParams {
        mu: args.mu,
        n_inner: args.n_inner,
        n_outer: args.n_outer,
        dt: args.dt,
        dtau: args.dtau,
        s_min: args.s_min,
        s_max: args.s_max,
        s_iters: args.s_iters,
        stopping: None,
    };
    config.plap = PlapParams {
        p: args.p,
        max_iter: args.plap_max_iter,
        grad_tol: args.plap_tol,
        ..PlapParams::default()
    };
    config.laplace_tol = args.laplace_tol;
    config.laplace_max_iter = args.laplace_max_iter;

    let report = trial::run_experiment(&config, &graph, &truth)?;

    std::fs::write(&args.out, trial::trials_csv(&report))?;
    let agg_path = args.agg_out.clone().unwrap_or_else(|| {
        let stem = args.out.file_stem().unwrap_or_default().to_string_lossy();
        let ext = args
            .out
            .extension()
            .map(|e| format!(".{}", e.to_string_lossy()))
            .unwrap_or_default();
        args.out.with_file_name(format!("{stem}_aggregate{ext}"))
    });
    std::fs::write(&agg_path, trial::aggregate_csv(&report))?;

    println!("algo: {}", report.algo);
    println!("{:>16} {:>10} {:>10} {:>8}", "labels/class", "mean", "std", "trials");
    for cell in &report.cells {
        println!(
            "{:>16} {:>10.4} {:>10.4} {:>8}",
            cell.labels_per_class,
            cell.mean,
            cell.std,
            cell.accuracies.len()
        );
        if cell.warning_count > 0 {
            eprintln!(
                "warning: {} solver warning(s) at {} labels/class \
                 (iteration caps or degenerate label sets)",
                cell.warning_count, cell.labels_per_class
            );
        }
    }
    println!("wrote {} and {}", args.out.display(), agg_path.display());
    Ok(())
}

fn synth_cmd(cmd: SynthCommand) -> anyhow::Result<()> {
    match cmd {
        SynthCommand::Square { n, seed, out } => {
            if n == 0 {
                bail!("--n must be positive");
            }
            let f = synth::synth_uniform_square(n, seed);
            io::write_features_csv(&out, &f)?;
            println!("wrote {} ({n} points)", out.display());
        }
        SynthCommand::Blobs {
            classes,
            per_class,
            separation,
            dim,
            seed,
            out,
            truth_out,
        } => {
            if classes == 0 || per_class == 0 || dim == 0 {
                bail!("--classes, --per-class and --dim must be positive");
            }
            let (f, truth) = synth::synth_blobs(classes, per_class, separation, dim, seed);
            io::write_features_csv(&out, &f)?;
            io::write_truth(&truth_out, &truth)?;
            println!(
                "wrote {} and {} ({} points, {classes} classes)",
                out.display(),
                truth_out.display(),
                f.nrows()
            );
        }
        SynthCommand::Cliques {
            size,
            out,
            truth_out,
        } => {
            if size == 0 {
                bail!("--size must be positive");
            }
            let (g, truth) = synth::synth_two_cliques(size);
            io::write_graph(&out, &g)?;
            io::write_truth(&truth_out, &truth)?;
            println!(
                "wrote {} and {} ({} nodes)",
                out.display(),
                truth_out.display(),
                g.node_count()
            );
        }
    }
    Ok(())
}
