//! `usd`: train and run unsupervised spectral demosaicing models.

mod cmd;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use usd_core::nn::AttentionKind;
use usd_core::train::PolicyChoice;

#[derive(Parser, Debug)]
#[command(name = "usd", version, about = "Unsupervised spectral demosaicing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate procedural hyperspectral scenes and a manifest.
    Synth(SynthArgs),
    /// Resample cubes to the filter bands and simulate their mosaics.
    Simulate(SimulateArgs),
    /// Train a model; writes a run directory.
    Train(TrainArgs),
    /// Demosaic one mosaic (or the simulated mosaic of a cube).
    Demosaic(DemosaicArgs),
    /// Compare an estimated cube with a reference.
    Evaluate(EvaluateArgs),
    /// Self-evaluation index of cubes or of a model's outputs.
    Sei(SeiArgs),
    /// SEI curve of a run and where a threshold would stop it.
    SeiCurve(SeiCurveArgs),
    /// Parameter table of a model and the LSA versus HSA comparison.
    Params(ParamsArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory for scenes and `manifest.txt`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    count: usize,
    /// How many of the scenes go to the validation split.
    #[arg(long, default_value_t = 1)]
    val: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    /// Source spectral samples, spread evenly over `--range`.
    #[arg(long, default_value_t = 61)]
    source_bands: usize,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [400.0, 1000.0])]
    range: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    complexity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Source cubes with a wavelength list, or cubes already at the pattern's band count.
    inputs: Vec<PathBuf>,
    /// Manifest of source cubes; split tags carry over.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `RxC` for a row-major pattern, or a pattern TOML file.
    #[arg(long, default_value = "5x5")]
    pattern: String,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [600.0, 900.0])]
    range: Vec<f64>,
    /// Filter FWHM in nm; defaults to the band spacing.
    #[arg(long)]
    fwhm: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write each mosaic as a 16-bit PNG.
    #[arg(long)]
    png: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Shift,
    Mixed,
    None,
}

impl From<PolicyArg> for PolicyChoice {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Shift => PolicyChoice::Shift,
            PolicyArg::Mixed => PolicyChoice::Mixed,
            PolicyArg::None => PolicyChoice::None,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AttentionArg {
    None,
    Lsa,
    Hsa,
}

impl From<AttentionArg> for AttentionKind {
    fn from(a: AttentionArg) -> Self {
        match a {
            AttentionArg::None => AttentionKind::None,
            AttentionArg::Lsa => AttentionKind::Lsa,
            AttentionArg::Hsa => AttentionKind::Hsa,
        }
    }
}

/// Flags shared by commands that build a model; each overrides the config file.
#[derive(Args, Debug, Default)]
struct ModelFlags {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// `RxC` for a row-major pattern, or a pattern TOML file.
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long, value_enum)]
    attention: Option<AttentionArg>,
    /// Drop the interpolation branch (ablation).
    #[arg(long)]
    no_interp_branch: bool,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    reduction: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Dataset manifest; its `train` and `val` splits are used.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stop once the SEI exceeds this value.
    #[arg(long)]
    sei_max: Option<f64>,
    #[arg(long, value_enum)]
    transform_policy: Option<PolicyArg>,
    /// Train against ground-truth cubes instead of the unsupervised loss.
    #[arg(long)]
    supervised: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    patch_size: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
}

#[derive(Args, Debug)]
struct DemosaicArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Mosaic (1 band) or cube (pattern bands) to demosaic.
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    estimate: PathBuf,
    reference: PathBuf,
    /// Per-band metrics as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// ERGAS resolution ratio.
    #[arg(long, default_value_t = 1.0)]
    ergas_ratio: f64,
}

#[derive(Args, Debug)]
struct SeiArgs {
    /// Cubes to score; with `--checkpoint`, inputs are demosaiced first.
    inputs: Vec<PathBuf>,
    /// `RxC` or a pattern TOML file; taken from the checkpoint when given.
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Manifest whose `val` split is scored.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SeiCurveArgs {
    /// Run directory holding `history.csv`.
    run: PathBuf,
    #[arg(long)]
    sei_max: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Also print every tensor.
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd::synth(a),
        Command::Simulate(a) => cmd::simulate(a),
        Command::Train(a) => cmd::train(a),
        Command::Demosaic(a) => cmd::demosaic(a),
        Command::Evaluate(a) => cmd::evaluate(a),
        Command::Sei(a) => cmd::sei(a),
        Command::SeiCurve(a) => cmd::sei_curve(a),
        Command::Params(a) => cmd::params(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
