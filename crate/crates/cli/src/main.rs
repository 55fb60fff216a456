use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dyngraph_cli::commands::{
    cmd_ablate, cmd_evaluate, cmd_extract, cmd_inspect_similarity, cmd_train, resolve_out,
};
use dyngraph_cli::config::{RunConfig, VariantName};
use dyngraph_cli::{CliError, CliResult};

/// Dynamic-graph sequence classification: windowed graph construction,
/// degree-aware Dice similarity, learnable graph convolution.
#[derive(Parser)]
#[command(name = "dyngraph", version, about)]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for fold-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-frame features (MFCC from WAVs, or normalize CSVs) plus a
    /// label manifest.
    Extract {
        /// Directory of .wav or .csv files.
        #[arg(long)]
        input: PathBuf,
    },
    /// Cross-validated training; writes metrics.json, model.bin, curves.csv.
    Train {
        /// Adjacency variant override.
        #[arg(long, value_enum)]
        variant: Option<VariantName>,
    },
    /// Evaluate a saved model on the configured dataset.
    Evaluate {
        /// Model file produced by `train`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Train all five adjacency variants against shared folds.
    Ablate,
    /// Print the Dice matrix of an edge-list topology as CSV.
    InspectSimilarity {
        /// Text file with one "i j" edge per line.
        #[arg(long)]
        edges: PathBuf,
        /// Node count m.
        #[arg(long)]
        nodes: usize,
        /// Which similarity to print.
        #[arg(long, default_value = "proposed")]
        kind: String,
    },
}

fn init_logging() {
    let level = std::env::var("DYNGRAPH_LOG").unwrap_or_else(|_| "error".to_string());
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;

    match cli.command {
        Command::Extract { input } => {
            let out = resolve_out(&cfg, cli.out, "extract")?;
            cmd_extract(&cfg, &input, &out)
        }
        Command::Train { variant } => {
            if let Some(v) = variant {
                cfg.adjacency.variant = v;
            }
            let out = resolve_out(&cfg, cli.out, "train")?;
            cmd_train(&cfg, &out)
        }
        Command::Evaluate { model } => cmd_evaluate(&cfg, &model, cli.out.as_deref()),
        Command::Ablate => {
            let out = resolve_out(&cfg, cli.out, "ablate")?;
            cmd_ablate(&cfg, &out)
        }
        Command::InspectSimilarity { edges, nodes, kind } => {
            cmd_inspect_similarity(&edges, nodes, &kind)
        }
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match &err {
                CliError::Usage(_) => log::debug!("usage failure"),
                CliError::Runtime(_) => log::debug!("runtime failure"),
            }
            err.exit_code()
        }
    }
}
