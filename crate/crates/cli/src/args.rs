use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use clicksel::dataset::Split;
use clicksel::graphcut::{Connectivity, EnergyParams, SigmaSq};
use clicksel::sampling::SamplingParams;

#[derive(Debug, Parser)]
#[command(name = "clicksel", version, about = "Interactive object selection from clicks")]
pub struct Cli {
    /// Seed for every random choice (scene synthesis, sampling, initialization, shuffling).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for dataset-level parallelism; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic scene dataset.
    Synth(SynthArgs),
    /// Move a seeded sample of train scenes to the val split, in place.
    Split(SplitArgs),
    /// Draw training pairs from a dataset split.
    Sample(SampleArgs),
    /// Train the reference network on sampled pairs.
    Train(TrainArgs),
    /// Segment one image from a set of clicks.
    Segment(SegmentArgs),
    /// Run the simulated clicker over a dataset split.
    Evaluate(EvaluateArgs),
    /// Serve the HTTP session API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Total number of scenes.
    #[arg(long)]
    pub count: usize,

    /// How many of the scenes (the last ones) go to the test split.
    #[arg(long, default_value_t = 0)]
    pub test_count: usize,

    /// Side length of each square scene, in pixels (at least 16).
    #[arg(long, default_value_t = 64)]
    pub size: usize,

    #[arg(long, default_value_t = 1)]
    pub min_shapes: usize,

    #[arg(long, default_value_t = 3)]
    pub max_shapes: usize,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,

    /// Number of train scenes to move to val.
    #[arg(long)]
    pub val_count: usize,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Width of the background band around the target, in pixels.
    #[arg(long = "d", default_value_t = 40)]
    pub d: u32,
    #[arg(long, default_value_t = 5)]
    pub n_pos: usize,
    #[arg(long, default_value_t = 10)]
    pub n_neg1: usize,
    #[arg(long, default_value_t = 5)]
    pub n_neg2: usize,
    #[arg(long, default_value_t = 10)]
    pub n_neg3: usize,
    /// Pairs per target instance.
    #[arg(long, default_value_t = 15)]
    pub n_pairs: usize,
    /// Minimum spacing between sampled clicks.
    #[arg(long, default_value_t = 10)]
    pub d_step: u32,
    /// Minimum distance from a sampled click to the object boundary.
    #[arg(long, default_value_t = 5)]
    pub d_margin: u32,
}

impl SamplingArgs {
    pub fn params(&self, seed: u64) -> SamplingParams {
        SamplingParams {
            d: self.d,
            n_pos: self.n_pos,
            n_neg1: self.n_neg1,
            n_neg2: self.n_neg2,
            n_neg3: self.n_neg3,
            n_pairs: self.n_pairs,
            d_step: self.d_step,
            d_margin: self.d_margin,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub dataset: PathBuf,

    #[arg(long, value_parser = parse_split, default_value = "train")]
    pub split: Split,

    /// Also sample from the horizontally mirrored copy of every scene.
    #[arg(long)]
    pub flip: bool,

    #[command(flatten)]
    pub sampling: SamplingArgs,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `sample`.
    #[arg(long)]
    pub pairs: PathBuf,

    #[arg(long)]
    pub model_out: PathBuf,

    /// Loss history JSON; defaults to `<model-out>.history.json`.
    #[arg(long)]
    pub history: Option<PathBuf>,

    #[arg(long, default_value_t = 10)]
    pub epochs: usize,

    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,

    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,

    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,

    /// Train on square windows of this side around each target.
    #[arg(long)]
    pub crop: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EnergyArgs {
    /// Weight of the unary term against the boundary term.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,

    /// Boundary-term bandwidth: `auto` or a positive number.
    #[arg(long, value_parser = parse_sigma_sq, default_value = "auto")]
    pub sigma_sq: SigmaSq,

    /// Neighbourhood size: 4 or 8.
    #[arg(long, value_parser = parse_connectivity, default_value = "8")]
    pub connectivity: Connectivity,

    /// Radius of the disk each click fixes in the cut.
    #[arg(long, default_value_t = 5)]
    pub hard_radius: u32,

    /// Probabilities are clamped to [p, 1 - p] before taking logs.
    #[arg(long, default_value_t = 1e-6)]
    pub prob_clamp: f64,

    /// Threshold the probability map at 0.5 instead of running the graph cut.
    #[arg(long)]
    pub no_graphcut: bool,
}

impl EnergyArgs {
    pub fn params(&self) -> EnergyParams {
        EnergyParams {
            lambda: self.lambda,
            sigma_sq: self.sigma_sq,
            connectivity: self.connectivity,
            hard_radius: self.hard_radius,
            prob_clamp: self.prob_clamp,
        }
    }
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("click_source").required(true).args(["clicks", "clicks_file"])))]
pub struct SegmentArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub image: PathBuf,

    /// Inline click JSON: `{"positives": [[r, c], ...], "negatives": [...]}`
    /// or an ordered `[{"row", "col", "polarity"}, ...]` list.
    #[arg(long)]
    pub clicks: Option<String>,

    /// File holding click JSON in either form.
    #[arg(long)]
    pub clicks_file: Option<PathBuf>,

    #[command(flatten)]
    pub energy: EnergyArgs,

    /// Mask PNG to write.
    #[arg(long)]
    pub out: PathBuf,

    /// Also write the network's probability map as an 8-bit PNG.
    #[arg(long)]
    pub prob_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, required_unless_present = "oracle_segmenter")]
    pub model: Option<PathBuf>,

    #[arg(long)]
    pub dataset: PathBuf,

    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,

    /// IU targets for the clicks-to-threshold statistic.
    #[arg(long, value_delimiter = ',', default_values_t = [0.85, 0.9])]
    pub thresholds: Vec<f64>,

    #[arg(long, default_value_t = 20)]
    pub max_clicks: usize,

    #[command(flatten)]
    pub energy: EnergyArgs,

    /// Pick lambda from these values on `--tune-split` before evaluating.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,

    #[arg(long, value_parser = parse_split, default_value = "val")]
    pub tune_split: Split,

    /// Directory for report.json, report.txt and curve.csv.
    #[arg(long)]
    pub out: PathBuf,

    /// Segment with the ground truth itself (harness self-test).
    #[arg(long, hide = true)]
    pub oracle_segmenter: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CLICKSEL_MODEL")]
    pub model: PathBuf,

    #[arg(long, env = "CLICKSEL_HOST", default_value = "127.0.0.1")]
    pub host: String,

    #[arg(long, env = "CLICKSEL_PORT", default_value_t = 8080)]
    pub port: u16,

    /// Longest accepted image side, in pixels.
    #[arg(long, env = "CLICKSEL_MAX_IMAGE_DIM", default_value_t = 1024)]
    pub max_image_dim: usize,

    /// Idle seconds before a session is dropped.
    #[arg(long, env = "CLICKSEL_SESSION_TTL", default_value_t = 1800)]
    pub session_ttl: u64,

    #[command(flatten)]
    pub energy: EnergyArgs,
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split {other:?}; expected train, val or test")),
    }
}

fn parse_sigma_sq(s: &str) -> Result<SigmaSq, String> {
    if s == "auto" {
        return Ok(SigmaSq::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(SigmaSq::Fixed(v)),
        _ => Err(format!("expected `auto` or a positive number, got {s:?}")),
    }
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    let n: u32 = s.parse().map_err(|_| format!("expected 4 or 8, got {s:?}"))?;
    Connectivity::from_count(n).map_err(|e| e.to_string())
}
