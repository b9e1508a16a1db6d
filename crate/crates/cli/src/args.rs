use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cohop::experiment::{AblationCell, ExperimentConfig, Precision};
use cohop::{Backbone, HistogramConfig, SplitMode, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "cohop",
    version,
    about = "Node classification with label histograms, consistency loss and pseudo-labels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate over several seeds; writes a JSON report.
    Train(TrainArgs),
    /// Run the component ablation lattice.
    Ablate(AblateArgs),
    /// Time exact vs approximate histogram featurization.
    BenchHistograms(BenchArgs),
    /// Evaluate a stored checkpoint.
    Eval(EvalArgs),
    /// Write a synthetic block-model dataset directory.
    GenerateSbm(SbmArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Transductive,
    Inductive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Dataset directory (edges.tsv, labels.tsv, features.bin, optional split.json).
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "transductive")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[arg(long, default_value_t = 20)]
    pub per_class_train: usize,
    #[arg(long, default_value_t = 30)]
    pub per_class_val: usize,
    #[arg(long, default_value_t = 0.2)]
    pub unseen_fraction: f64,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Histogram decay; defaults depend on the histogram mode.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Hidden width; selects the two-layer backbone.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, conflicts_with = "no_histograms")]
    pub approx_histograms: bool,
    #[arg(long)]
    pub no_histograms: bool,
    #[arg(long)]
    pub no_consistency: bool,
    #[arg(long)]
    pub no_iterations: bool,
    /// Select pseudo-labels from raw predictions (lambda = 1).
    #[arg(long)]
    pub no_smoothing: bool,
    #[arg(long)]
    pub hard_pseudo_labels: bool,
    #[arg(long)]
    pub detach_consistency_target: bool,
    #[arg(long, value_enum, default_value = "f32")]
    pub precision: PrecisionArg,
}

impl RunArgs {
    pub fn experiment_config(&self) -> ExperimentConfig {
        let defaults = TrainConfig::default();
        let mut histograms = if self.approx_histograms {
            HistogramConfig::approximate()
        } else {
            HistogramConfig::exact()
        };
        if let Some(alpha) = self.alpha {
            histograms.alpha = alpha;
        }
        if let Some(ell) = self.ell {
            histograms.ell = ell;
        }
        let backbone = match self.hidden {
            Some(hidden) => Backbone::Mlp { hidden },
            None => Backbone::Linear,
        };
        let default_lr = match backbone {
            Backbone::Linear => defaults.learning_rate,
            Backbone::Mlp { .. } => 1e-3,
        };
        let train = TrainConfig {
            iterations: self.iterations.unwrap_or(defaults.iterations),
            epochs: self.epochs.unwrap_or(defaults.epochs),
            gamma: self.gamma.unwrap_or(defaults.gamma),
            tau: self.tau.unwrap_or(defaults.tau),
            lambda: self.lambda.unwrap_or(defaults.lambda),
            seed: 0,
            backbone,
            learning_rate: self.learning_rate.unwrap_or(default_lr),
            histograms,
            use_consistency: !self.no_consistency,
            use_histograms: !self.no_histograms,
            use_iterations: !self.no_iterations,
            use_smoothing: !self.no_smoothing,
            hard_pseudo_labels: self.hard_pseudo_labels,
            detach_consistency_target: self.detach_consistency_target,
        };
        ExperimentConfig {
            mode: match self.mode {
                ModeArg::Transductive => SplitMode::Transductive,
                ModeArg::Inductive => SplitMode::Inductive,
            },
            seeds: self.seeds,
            seed_base: self.seed_base,
            per_class_train: self.per_class_train,
            per_class_val: self.per_class_val,
            unseen_fraction: self.unseen_fraction,
            precision: match self.precision {
                PrecisionArg::F32 => Precision::F32,
                PrecisionArg::F64 => Precision::F64,
            },
            train,
        }
    }
}

fn parse_cell(s: &str) -> Result<AblationCell, String> {
    AblationCell::parse(s).ok_or_else(|| {
        let names: Vec<String> = AblationCell::lattice().iter().map(|c| c.name()).collect();
        format!("unknown cell '{s}', expected one of: {}", names.join(", "))
    })
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a one-row CSV summary.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Override the component flags with one ablation cell, e.g. `base`.
    #[arg(long, value_parser = parse_cell)]
    pub ablation: Option<AblationCell>,
    /// Write one checkpoint per seed (`seed-<k>.cohm`).
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated subset of cells; all eight when omitted.
    #[arg(long, value_delimiter = ',', value_parser = parse_cell)]
    pub cells: Vec<AblationCell>,
    /// JSON report path; the text table always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,6,8,10")]
    pub ells: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Decay for the approximate histograms (`--alpha` sets the exact one).
    #[arg(long)]
    pub alpha_approx: Option<f64>,
    /// Skip the downstream accuracy runs.
    #[arg(long)]
    pub timing_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Seed whose split the checkpoint was trained on.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SbmArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub nodes: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.05)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.005)]
    pub p_out: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mean_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
