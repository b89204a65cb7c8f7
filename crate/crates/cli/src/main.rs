use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use knnvis_cli::pipeline::LinkKind;
use knnvis_cli::{ingest, replay, run_pipeline, CliError, RunRequest, RunSettings};
use knnvis_core::synthetic::gaussian_mixture;
use knnvis_core::LabeledSet;

#[derive(Parser)]
#[command(
    name = "knnvis",
    version,
    about = "Lay out high-dimensional vectors in 2-D or 3-D"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the neighbor graph, lay it out and write the coordinates.
    Run(Box<RunArgs>),
    /// Write a Gaussian mixture and its cluster labels.
    Gen(GenArgs),
    /// Repeat a run recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// One label per line, in input order.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Scatter plot of a 2-d layout.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Random projection trees [default: 15].
    #[arg(long)]
    trees: Option<usize>,
    /// Neighbors per point [default: 150, or 15 below 10k points].
    #[arg(long)]
    k: Option<usize>,
    /// Neighbor-exploring passes [default: 1].
    #[arg(long)]
    iters: Option<usize>,
    /// [default: 50, or k/3 when k < 50]
    #[arg(long)]
    perplexity: Option<f64>,
    /// Output dimension [default: 2].
    #[arg(long)]
    dim: Option<usize>,
    /// Negative samples per edge [default: 5].
    #[arg(long)]
    negatives: Option<usize>,
    /// Weight of the negative edges [default: 7].
    #[arg(long)]
    gamma: Option<f64>,
    /// Edge samples per point [default: 10000, or 20000 below 10k points].
    #[arg(long)]
    samples_per_node: Option<u64>,
    /// Initial learning rate [default: 1].
    #[arg(long)]
    rate: Option<f64>,
    /// invq or sigmoid [default: invq].
    #[arg(long)]
    link: Option<LinkKind>,
    /// Inverse-quadratic link scale [default: 1].
    #[arg(long)]
    a: Option<f64>,
    /// Threads [default: all cores].
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Compare against the exact KNN graph (quadratic time).
    #[arg(long)]
    exact_recall: bool,
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// [default: <output>.manifest.json]
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    /// Per-coordinate standard deviation around each center.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// [default: <output>.labels]
    #[arg(long)]
    labels: Option<PathBuf>,
}

impl RunArgs {
    fn into_request(self) -> RunRequest {
        RunRequest {
            input: self.input,
            output: self.output,
            labels: self.labels,
            svg: self.svg,
            metrics_out: self.metrics_out,
            manifest: self.manifest,
            exact_recall: self.exact_recall,
            settings: RunSettings {
                trees: self.trees,
                k: self.k,
                iters: self.iters,
                perplexity: self.perplexity,
                dim: self.dim,
                negatives: self.negatives,
                gamma: self.gamma,
                samples_per_node: self.samples_per_node,
                rate: self.rate,
                link: self.link,
                a: self.a,
                workers: self.workers,
                seed: self.seed,
            },
        }
    }
}

fn generate(args: GenArgs) -> Result<(), CliError> {
    if args.n == 0 || args.d == 0 || args.clusters == 0 {
        return Err(CliError::Invalid("n, d and clusters must be >= 1".into()));
    }
    if !(args.spread >= 0.0 && args.spread.is_finite()) {
        return Err(CliError::Invalid(
            "spread must be a finite value >= 0".into(),
        ));
    }
    let (data, ids) = gaussian_mixture(args.n, args.d, args.clusters, args.spread, args.seed);
    ingest::write_vectors(&data, &args.output)?;
    let labels_path = args.labels.unwrap_or_else(|| {
        let mut s = args.output.clone().into_os_string();
        s.push(".labels");
        PathBuf::from(s)
    });
    let text = ingest::labels_to_text(&LabeledSet::from_ids(&ids));
    std::fs::write(&labels_path, text).map_err(|e| CliError::io(&labels_path, e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run(args) => run_pipeline(&args.into_request()).map(drop),
        Command::Gen(args) => generate(args),
        Command::Replay { manifest, output } => replay(&manifest, &output).map(drop),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("knnvis: {e}");
            ExitCode::FAILURE
        }
    }
}
