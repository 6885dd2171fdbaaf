//! Command-line driver for dataset generation, learning, rollouts,
//! metrics and observability checks.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "TOKENOBS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "tokenobs", version, about = "Lattice PDE datasets, patch tokens and linear world models")]
pub struct Cli {
    /// TOML file with one table per verb; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice the verb makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to TOKENOBS_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset from a preset or config.
    Generate(GenerateArgs),
    /// Patch-average every frame of a dataset.
    Tokenize(TokenizeArgs),
    /// Fit an autoregressive (g) or reconstruction (G) map.
    Fit(FitArgs),
    /// Held-out one-step error as a function of history length.
    Sweep(SweepArgs),
    /// Roll a fitted map forward from held-out seed frames.
    Rollout(RolloutArgs),
    /// Residues, temporal correlation or nearest-subvideo distance.
    Metrics(MetricsArgs),
    /// Observability certificates for lattice systems.
    Observability(ObservabilityArgs),
    /// Write one frame as a PGM/PPM image.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// heat_lowres, heat_lowres_constant, wave_lowres, kse_lowres or kse1d_lie.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub equation: Option<String>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub skip: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub inits: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub domain_length: Option<f64>,
    /// Replace the conductivity by its constant counterpart.
    #[arg(long)]
    pub constant_conductivity: bool,
    #[arg(long)]
    pub conductivity_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub patch: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct LearnerArgs {
    /// lstsq or sgd.
    #[arg(long)]
    pub learner: Option<String>,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub no_bias: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// g (autoregressive) or G (reconstruction).
    #[arg(long)]
    pub role: Option<String>,
    /// History length.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated history lengths.
    #[arg(long, value_delimiter = ',')]
    pub k_list: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub no_normalize: bool,
    /// CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerArgs,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Autoregressive map file.
    #[arg(long)]
    pub g_map: Option<PathBuf>,
    /// Reconstruction map file (needed with --pipeline).
    #[arg(long)]
    pub recon_map: Option<PathBuf>,
    /// Also reconstruct full fields at every generated frame.
    #[arg(long)]
    pub pipeline: bool,
    /// Index into the held-out split.
    #[arg(long)]
    pub init: Option<usize>,
    /// First seed frame within that trajectory.
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long)]
    pub seed_frames: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub no_normalize: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long, group = "metric")]
    pub residues: bool,
    #[arg(long, group = "metric")]
    pub correlation: bool,
    #[arg(long, group = "metric")]
    pub subvideo_distance: bool,
    /// Predicted dataset (residues) or clip dataset (subvideo distance).
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Reference dataset.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Trajectory index within the reference dataset.
    #[arg(long)]
    pub truth_init: Option<usize>,
    /// First reference frame matched against the prediction.
    #[arg(long)]
    pub truth_start: Option<usize>,
    /// Pixel as `i,j`.
    #[arg(long, value_delimiter = ',')]
    pub pixel: Option<Vec<usize>>,
    #[arg(long)]
    pub dt_max: Option<usize>,
    /// Cut each trajectory into non-overlapping videos of this many frames.
    #[arg(long)]
    pub video_len: Option<usize>,
    #[arg(long)]
    pub clip_len: Option<usize>,
    /// CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ObservabilityArgs {
    #[arg(long)]
    pub kalman: bool,
    #[arg(long)]
    pub hautus: bool,
    #[arg(long)]
    pub gramian: bool,
    #[arg(long)]
    pub lie_logdet: bool,
    #[arg(long)]
    pub witness: bool,
    /// heat or wave.
    #[arg(long)]
    pub equation: Option<String>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub patch: Option<usize>,
    /// constant or grf.
    #[arg(long)]
    pub conductivity: Option<String>,
    /// Constant value, or the scale of the random conductivity.
    #[arg(long)]
    pub conductivity_value: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub rank_tol: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub quad_steps: Option<usize>,
    /// 1D KSE dataset for --lie-logdet (generated from the preset when absent).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub orders: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Frames ignored when reporting the full-rank fraction.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Report file (key = value lines).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub init: usize,
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Blue-white-red pixmap instead of a graymap.
    #[arg(long)]
    pub color: bool,
    /// Value range mapped to 0..255, as `lo,hi`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub range: Option<Vec<f64>>,
}

/// Configure the global thread pool from the flag or the environment.
pub fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(n) = n.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not set {n} worker threads: {e}");
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Generate(a) => commands::data::generate(a, cfg, cli.seed),
        Command::Tokenize(a) => commands::data::tokenize(a, cfg),
        Command::Export(a) => commands::data::export(a),
        Command::Fit(a) => commands::learn::fit(a, cfg, cli.seed),
        Command::Sweep(a) => commands::learn::sweep(a, cfg, cli.seed),
        Command::Rollout(a) => commands::learn::rollout(a, cfg),
        Command::Metrics(a) => commands::metrics::metrics(a, cfg),
        Command::Observability(a) => commands::observe::observability(a, cfg, cli.seed),
    }
}
