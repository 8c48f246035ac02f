//! `flowsynth`: preprocessing, per-class GAN training, synthesis, augmentation
//! and IDS evaluation for network-flow tables.

mod commands;
mod layered;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "flowsynth", version, about = "Flow-table augmentation with a discrete-aware WGAN-GP")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode raw flow tables into train/test containers plus the codec.
    Preprocess(PreprocessArgs),
    /// Train one class's generator.
    TrainGan(TrainGanArgs),
    /// Sample synthetic rows from a generator checkpoint.
    Generate(GenerateArgs),
    /// Append synthetic rows to a training set per an augmentation plan.
    Augment(AugmentArgs),
    /// Train one IDS classifier.
    TrainIds(TrainIdsArgs),
    /// Repeated-run IDS evaluation on a train/test pair.
    Eval(EvalArgs),
    /// Leave-one-attack-out evaluation.
    Loao(LoaoArgs),
    /// Sliced Wasserstein distance between two containers.
    Swd(SwdArgs),
    /// Principal-component projection of containers onto a reference basis.
    Pca(PcaArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    NslKdd,
    UnswNb15,
    Cicids2017,
}

#[derive(Args)]
pub struct PreprocessArgs {
    /// Raw table(s): train then test, or a single file to split.
    #[arg(long, required = true, num_args = 1..=2)]
    pub data: Vec<PathBuf>,
    /// Schema TOML; optional when the preset carries one.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub dataset_preset: Option<Preset>,
    /// Train share for a single input file without a preset split rule.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TrainPreset {
    /// Full-size networks, 5000 epochs.
    Paper,
    /// Full-size networks, 200 epochs.
    Smoke,
    /// Narrow networks, 500 epochs.
    Desk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Component {
    Ae,
    Gate,
    Attention,
}

#[derive(Args)]
pub struct TrainGanArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub class: String,
    /// Training config TOML, overlaid on the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "paper")]
    pub preset: TrainPreset,
    /// g-wgan-gp, ga-wgan-gp, gma-wgan-gp or gma-sawgan-gp.
    #[arg(long)]
    pub variant: Option<String>,
    /// Components to switch off.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub ablate: Vec<Component>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Codec JSON to embed; defaults to `codec.json` beside the training set.
    #[arg(long)]
    pub codec: Option<PathBuf>,
    /// Keep the last good checkpoint and loss log when training aborts.
    #[arg(long)]
    pub keep_partial: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub generator: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write decoded rows as CSV (needs an embedded codec).
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Generator checkpoints, one per augmented class.
    #[arg(long = "generator", required = true)]
    pub generators: Vec<PathBuf>,
    /// Use the preset's augmentation table.
    #[arg(long, value_enum, conflicts_with_all = ["targets", "scale"])]
    pub dataset_preset: Option<Preset>,
    /// TOML table of `class = target_count`.
    #[arg(long, conflicts_with = "scale")]
    pub targets: Option<PathBuf>,
    /// Classes to scale by `--factor`, capped at `--cap`.
    #[arg(long, value_delimiter = ',')]
    pub scale: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub factor: usize,
    #[arg(long, default_value_t = 2000)]
    pub cap: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Protocol config TOML.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Classifier kinds (cnn, dnn, lstm, cnn-bilstm, cnn-lstm).
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tag such as `original` or `augmented`.
    #[arg(long)]
    pub condition: Option<String>,
    #[arg(long)]
    pub normal_class: Option<String>,
    /// Worker threads across independent (kind, run) jobs.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TaskArg {
    Binary,
    Multi,
}

#[derive(Args)]
pub struct TrainIdsArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub kind: String,
    #[arg(long, value_enum, default_value = "multi")]
    pub task: TaskArg,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "Normal")]
    pub normal_class: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, value_enum)]
    pub task: TaskArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NegativesArg {
    /// Normal test rows only.
    Normal,
    /// Every test row not of the unknown class.
    AllOthers,
}

#[derive(Args)]
pub struct LoaoArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Attack class withheld from training.
    #[arg(long)]
    pub unknown: String,
    #[arg(long, value_enum, default_value = "normal")]
    pub negatives: NegativesArg,
}

#[derive(Args)]
pub struct SwdArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Restrict both sets to this class.
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long, default_value_t = 256)]
    pub projections: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PcaArgs {
    /// Set the basis is fitted on.
    #[arg(long)]
    pub reference: PathBuf,
    /// Additional sets as `tag=path`.
    #[arg(long = "compare")]
    pub compare: Vec<String>,
    #[arg(long, default_value = "real")]
    pub reference_tag: String,
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = commands::run(cli.command);
    ExitCode::from(code as u8)
}
