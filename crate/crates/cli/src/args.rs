use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Environment variables named `HRIR_TCN_<FLAG>` (for example
/// `HRIR_TCN_SEED`) stand in for flags; explicit flags win over the
/// environment, which wins over `--config`.
pub const ENV_PREFIX: &str = "HRIR_TCN_";

#[derive(Debug, Parser)]
#[command(name = "hrir-tcn", version, about = "Generate HRIRs for new directions from a 0 degree measurement")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true, env = "HRIR_TCN_CONFIG")]
    pub config: Option<PathBuf>,

    /// Base seed for fold assignment, search, training and stimuli
    #[arg(long, global = true, env = "HRIR_TCN_SEED")]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "HRIR_TCN_WORKERS")]
    pub workers: Option<usize>,

    /// Output directory
    #[arg(long, global = true, env = "HRIR_TCN_OUT")]
    pub out: Option<PathBuf>,

    /// Allow architecture and search settings outside the supported ranges
    #[arg(long, global = true)]
    pub unsafe_ranges: bool,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Errors only
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

/// Dataset and model settings shared by the training commands.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainingArgs {
    /// Dataset directory holding manifest.json
    #[arg(long, env = "HRIR_TCN_DATASET")]
    pub dataset: Option<PathBuf>,

    /// Training epochs of the final model
    #[arg(long, env = "HRIR_TCN_EPOCHS")]
    pub epochs: Option<usize>,

    /// Hidden channels (fixed training; the search overrides it)
    #[arg(long, env = "HRIR_TCN_CHANNELS")]
    pub channels: Option<usize>,

    /// Residual blocks (fixed training; the search overrides it)
    #[arg(long, env = "HRIR_TCN_LAYERS")]
    pub layers: Option<usize>,

    #[arg(long, env = "HRIR_TCN_WEIGHT_DECAY")]
    pub weight_decay: Option<f64>,

    #[arg(long, env = "HRIR_TCN_LEARNING_RATE")]
    pub learning_rate: Option<f64>,

    #[arg(long, env = "HRIR_TCN_DROPOUT")]
    pub dropout: Option<f64>,

    /// Search trials per direction and fold
    #[arg(long, env = "HRIR_TCN_TRIALS")]
    pub trials: Option<usize>,

    /// Epochs per search trial (default: --epochs)
    #[arg(long, env = "HRIR_TCN_SEARCH_EPOCHS")]
    pub search_epochs: Option<usize>,

    /// Search range of channels, as LO,HI
    #[arg(long, value_parser = parse_usize_range)]
    pub search_channels: Option<(usize, usize)>,

    /// Search range of layers, as LO,HI
    #[arg(long, value_parser = parse_usize_range)]
    pub search_layers: Option<(usize, usize)>,

    /// Search range of weight decay, as LO,HI
    #[arg(long, value_parser = parse_f64_range)]
    pub search_weight_decay: Option<(f64, f64)>,

    /// Target azimuths, comma separated
    #[arg(long, value_delimiter = ',', env = "HRIR_TCN_DIRECTIONS")]
    pub directions: Option<Vec<u32>>,

    /// Epoch cadence of the recorded loss curve
    #[arg(long, env = "HRIR_TCN_RECORD_EVERY")]
    pub record_every: Option<usize>,
}

fn split_pair(s: &str) -> Result<(&str, &str), String> {
    s.split_once(',').ok_or_else(|| format!("expected LO,HI, got `{s}`"))
}

fn parse_usize_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = split_pair(s)?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn parse_f64_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = split_pair(s)?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resample, trim and band-limit a dataset into canonical form
    Preprocess {
        /// Input dataset directory
        #[arg(long)]
        input: PathBuf,
    },

    /// Write a synthetic dataset with the layout of a raw measurement set
    Synth {
        #[arg(long, default_value_t = 12)]
        subjects: usize,

        /// Write preprocessed 492-sample records instead of raw 48 kHz ones
        #[arg(long)]
        canonical: bool,
    },

    /// Train one model on every subject of a dataset
    Train {
        #[command(flatten)]
        training: TrainingArgs,

        #[arg(long)]
        direction: u32,
    },

    /// Hyperparameter search for one direction with 5-fold validation
    Search {
        #[command(flatten)]
        training: TrainingArgs,

        #[arg(long)]
        direction: u32,
    },

    /// Cross-validation (riec_cv) or transfer to an external dataset
    Experiment {
        #[command(flatten)]
        training: TrainingArgs,

        /// riec_cv or transfer
        #[arg(long, env = "HRIR_TCN_PROTOCOL")]
        protocol: Option<String>,

        /// External dataset directory (transfer)
        #[arg(long, env = "HRIR_TCN_EXTERNAL")]
        external: Option<PathBuf>,
    },

    /// Generate all five target directions from one 0 degree pair
    Generate {
        /// Directory with az060.ckpt ... az300.ckpt
        #[arg(long, env = "HRIR_TCN_CHECKPOINTS")]
        checkpoints: Option<PathBuf>,

        /// Left-ear 0 degree HRIR (.wav or raw f32)
        #[arg(long)]
        left: PathBuf,

        /// Right-ear 0 degree HRIR (.wav or raw f32)
        #[arg(long)]
        right: PathBuf,

        /// Sample rate of the input files; anything but 44100 is preprocessed
        #[arg(long, default_value_t = 44_100)]
        input_rate: u32,

        /// Directory with measured azNNN_left/right files to score against
        #[arg(long)]
        truth: Option<PathBuf>,

        #[arg(long, default_value_t = 44_100)]
        truth_rate: u32,

        /// Subject id of the written record
        #[arg(long, default_value = "generated")]
        subject_id: String,
    },

    /// Score models on a dataset, or re-score a recorded listening session
    Evaluate {
        #[arg(long, env = "HRIR_TCN_CHECKPOINTS")]
        checkpoints: Option<PathBuf>,

        #[arg(long, env = "HRIR_TCN_DATASET")]
        dataset: Option<PathBuf>,

        /// Session directory with plan.json and responses.jsonl
        #[arg(long, conflicts_with_all = ["checkpoints", "dataset"])]
        session: Option<PathBuf>,
    },

    /// Render the stimuli and run the listening test service
    Serve {
        #[arg(long, env = "HRIR_TCN_CHECKPOINTS")]
        checkpoints: Option<PathBuf>,

        /// Directory with the listener's measured azNNN_left/right files
        #[arg(long)]
        measured: PathBuf,

        #[arg(long, default_value_t = 44_100)]
        measured_rate: u32,

        #[arg(long, default_value = "127.0.0.1")]
        host: String,

        #[arg(long, default_value_t = 8080, env = "HRIR_TCN_PORT")]
        port: u16,

        /// Static client bundle (default: the built-in page)
        #[arg(long)]
        ui_dir: Option<PathBuf>,

        #[arg(long, default_value_t = 10)]
        trials_per_condition: usize,

        /// Render and write the stimuli, then exit
        #[arg(long)]
        dry_run: bool,
    },

    /// Explain how to export measurement containers to the dataset layout
    Convert,
}
