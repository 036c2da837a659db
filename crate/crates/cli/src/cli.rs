use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "oge", version, about = "Glare evaluation for 180° fisheye HDR images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Seed for fold assignment, training and scene generation.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of cross-validation folds.
    #[arg(long, global = true, default_value_t = 5)]
    pub folds: usize,
    /// Output file (or directory for `synth` and multi-grid `extract`).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Fail instead of skipping unreadable or unlabelled inputs.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multi-region luminance features, one row per image.
    Extract(ExtractArgs),
    /// The 24 luminance, illuminance and glare-index values per image.
    Metrics(MetricsArgs),
    /// Cross-validate a classifier, then fit it on every row.
    Train(TrainArgs),
    /// Score images (or a feature CSV) with a trained model.
    Predict(PredictArgs),
    /// Per-metric cutoffs, fold-averaged and on the combined data.
    Roc(RocArgs),
    /// Generate a labelled synthetic scene corpus.
    Synth(SynthArgs),
    /// Render a log-scaled false-colour luminance map.
    Falsecolor(FalsecolorArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Extract(_) => "extract",
            Command::Metrics(_) => "metrics",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Roc(_) => "roc",
            Command::Synth(_) => "synth",
            Command::Falsecolor(_) => "falsecolor",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractArgs {
    /// HDR files or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Grid size(s); several sizes write one CSV per grid into the `--out` directory.
    #[arg(long, value_delimiter = ',', default_value = "25")]
    pub grid: Vec<usize>,
    /// `ellipse:a_h,a_v[,offset_v]` or a file of `grid,row,col` lines.
    #[arg(long)]
    pub mask: Option<String>,
    /// CSV with `id,label` columns joined on the image id.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Background {
    IndirectIlluminance,
    MeanNonSource,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricsArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Task zone cone as `theta,phi,radius` in degrees.
    #[arg(long)]
    pub task_zone: Option<String>,
    /// Source pixels exceed this multiple of the task luminance.
    #[arg(long, default_value_t = 5.0)]
    pub threshold_multiplier: f64,
    #[arg(long, value_enum, default_value = "indirect-illuminance")]
    pub background: Background,
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Labelled feature CSV from `extract` or `metrics`.
    pub features: PathBuf,
    #[arg(long, default_value = "rusboost_trees")]
    pub algorithm: String,
    /// Hyperparameter override `key=value`, repeatable.
    #[arg(long = "param")]
    pub params: Vec<String>,
    /// Where to write the trained model (JSON).
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    /// HDR files or directories of them.
    #[arg(required_unless_present = "features")]
    pub inputs: Vec<PathBuf>,
    /// Score the rows of a feature CSV instead of images.
    #[arg(long, conflicts_with = "inputs")]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RocArgs {
    /// Labelled CSV from `metrics`.
    pub metrics: PathBuf,
    /// `sqd` (minimum squared distance) or `youden`.
    #[arg(long, default_value = "sqd")]
    pub objective: String,
    /// `per-fold` or `mean-cutoff`.
    #[arg(long, default_value = "per-fold")]
    pub fold_eval: String,
    /// Restrict to these columns (repeatable).
    #[arg(long = "metric")]
    pub metric: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Quota,
    Bernoulli,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 80)]
    pub n: usize,
    /// Image side in pixels.
    #[arg(long, default_value_t = 240)]
    pub size: usize,
    #[arg(long, default_value_t = 0.375)]
    pub positive_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    #[arg(long, value_enum, default_value = "quota")]
    pub sampling: Sampling,
    /// Minimum distance of the generative score from the label threshold.
    #[arg(long)]
    pub score_margin: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FalsecolorArgs {
    pub input: PathBuf,
    /// Luminance at the bottom of the ramp, cd/m².
    #[arg(long, default_value_t = 10.0)]
    pub min: f64,
    /// Luminance at the top of the ramp, cd/m².
    #[arg(long, default_value_t = 10000.0)]
    pub max: f64,
}
