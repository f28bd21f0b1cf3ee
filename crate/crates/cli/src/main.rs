//! `arp`: train, compare and diagnose classic vs auto-rotating networks.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
//! 3 missing or malformed data.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use arp_core::data::{DatasetId, Split};
use arp_core::experiment::ModeSelection;
use arp_core::layers::LayerKind;
use arp_core::optim::OptimizerKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "arp", version, about = "Classic vs auto-rotating perceptron experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one network and write its per-epoch metrics CSV.
    Train(TrainArgs),
    /// Train classic and ARP arms from shared seeds; write metrics and a summary.
    Compare(CompareArgs),
    /// Check every backward pass against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Per-layer gradient norms at initialization for both arms.
    Probe(ProbeArgs),
    /// Print size, shape, label histogram and value range of a dataset split.
    #[command(visible_alias = "data-inspect")]
    Inspect(InspectArgs),
}

/// Flags shared by the commands that build an experiment configuration.
/// Each one overrides the value from `--config`.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// mnist, fashion, cifar10 or blobs.
    #[arg(long)]
    pub dataset: Option<DatasetId>,
    /// Directory holding mnist/, fashion-mnist/ and cifar-10-batches-bin/.
    #[arg(long, env = "ARP_DATA_DIR", value_name = "PATH")]
    pub data_dir: Option<PathBuf>,
    /// Layer widths, e.g. 784-50-50-40-30-30-20-10. Defaults to the
    /// dataset's reference architecture (2-8-2 for blobs).
    #[arg(long)]
    pub arch: Option<String>,
    /// Pre-activation magnitude pinned at the probe point.
    #[arg(long, value_name = "REAL")]
    pub l_cap: Option<f64>,
    /// Value of every probe-point component.
    #[arg(long, value_name = "REAL")]
    pub xq: Option<f64>,
    /// Floor for |w·x_Q + b|.
    #[arg(long, value_name = "REAL")]
    pub eps: Option<f64>,
    /// coupled, detached, or both (compare only).
    #[arg(long)]
    pub mode: Option<ModeSelection>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Learning rate.
    #[arg(long, value_name = "REAL")]
    pub lr: Option<f64>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    /// Master seed (the first seed for multi-seed commands).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record wall-clock seconds (makes metrics files non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// classic or arp.
    #[arg(long)]
    pub layer: Option<LayerKind>,
    /// Metrics CSV path.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Print per-minibatch loss and gradient norms to stderr.
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of seeds, counted up from --seed.
    #[arg(long, value_name = "N")]
    pub seeds: Option<usize>,
    /// Metrics CSV path for every (seed, arm) run.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Summary JSON path.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of seeds, counted up from --seed.
    #[arg(long, value_name = "N")]
    pub seeds: Option<usize>,
    /// JSON report path.
    #[arg(long, value_name = "PATH", default_value = "probe.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances per component.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    /// ρ modes of the ARP checks: coupled, detached or both.
    #[arg(long, default_value = "both")]
    pub mode: ModeSelection,
    /// Architecture of the composed-network check.
    #[arg(long, default_value = "784-20-20-10")]
    pub arch: String,
    /// Batch size of the composed-network check.
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    /// Coordinates sampled per weight matrix of the network check.
    #[arg(long, value_name = "N", default_value_t = 256)]
    pub max_coords: usize,
    /// Also write the full report as JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub dataset: DatasetId,
    #[arg(long, env = "ARP_DATA_DIR", value_name = "PATH")]
    pub data_dir: Option<PathBuf>,
    /// train or test.
    #[arg(long, default_value = "train")]
    pub split: Split,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Compare(a) => commands::compare(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Probe(a) => commands::probe(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
