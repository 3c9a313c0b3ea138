use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use selnet_core::pipeline::{
    ExperimentConfig, NormPolicy, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LR, DEFAULT_PATIENCE,
    DEFAULT_THRESHOLD,
};
use selnet_core::selectornet::{FabStepSource, FabVariant, ResBlockVariant, SelectorVariant, Variant, DEFAULT_STEPS};

#[derive(Debug, Parser)]
#[command(name = "selnet", version, about = "SelectorNet feature extraction, training and experiments")]
pub struct Cli {
    /// Train folds one after another instead of on a thread pool. Outputs are
    /// identical either way.
    #[arg(long, global = true)]
    pub single_thread: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tongue images, masks, physiological records and detections to a feature CSV.
    Extract(ExtractArgs),
    /// Generate a planted-signal synthetic cohort.
    Synth(SynthArgs),
    /// K-fold cross-validation of SelectorNet, written to a new run directory.
    Train(TrainArgs),
    /// Metrics of a saved checkpoint on a dataset.
    Eval(EvalArgs),
    /// Per-sample, per-feature attention of a saved checkpoint.
    Explain(ExplainArgs),
    /// Cross-validate every ablation variant and write one comparison table.
    Ablate(AblateArgs),
    /// Append uniform noise features, retrain and compare attention.
    Perturb(PerturbArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AspectArg {
    HeightOverWidth,
    WidthOverHeight,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory of `<id>.png|jpg|jpeg` tongue images.
    #[arg(long)]
    pub images: PathBuf,
    /// Directory of `<id>.png` masks, nonzero = tongue.
    #[arg(long)]
    pub masks: PathBuf,
    /// CSV with `id`, the physiological indicators and optionally `label`.
    #[arg(long)]
    pub physio: PathBuf,
    /// CSV of `image_id,class,x_min,y_min,x_max,y_max` detections.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// CSV of `id,emb_0,..` image embeddings to append.
    #[arg(long, conflicts_with = "stub_embed")]
    pub embeddings: Option<PathBuf>,
    /// Append deterministic hash-derived stand-in embeddings.
    #[arg(long)]
    pub stub_embed: bool,
    /// Width of the stand-in embedding.
    #[arg(long, default_value_t = 10)]
    pub embed_dim: usize,
    /// Gray levels of the co-occurrence matrix.
    #[arg(long, default_value_t = 64)]
    pub levels: usize,
    /// Pixel distance of co-occurring pairs.
    #[arg(long, default_value_t = 1)]
    pub distance: u32,
    /// Which bounding-box ratio is the tongue's aspect.
    #[arg(long, value_enum, default_value_t = AspectArg::HeightOverWidth)]
    pub aspect: AspectArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub informative: usize,
    #[arg(long, default_value_t = 15)]
    pub nuisance: usize,
    #[arg(long, env = "SELNET_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Class-mean distance of each informative feature.
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    /// Strength of the interaction planted on the second informative feature.
    #[arg(long, default_value_t = 0.5)]
    pub interaction: f64,
    #[arg(long, default_value_t = 10)]
    pub embed_dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Ablation rows, each one module replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantRow {
    /// The unmodified network.
    Base,
    /// ResBlock replaced by Linear+ReLU.
    ResblockLinearRelu,
    /// SelectorBlock replaced by Concat+Linear+ReLU.
    SelectorConcat,
    /// SelectorBlock replaced by Add+Linear+ReLU.
    SelectorAdd,
    /// SelectorBlock replaced by Hadamard+Linear+ReLU.
    SelectorHadamard,
    /// SelectorBlock with only its first stage.
    SelectorStage1Only,
    /// SelectorBlock with only its second stage.
    SelectorStage2Only,
    /// Fusion attention replaced by Concat+Linear+ReLU.
    FabConcat,
}

impl VariantRow {
    pub fn variant(self) -> Variant {
        let base = Variant::default();
        let selector = |selector| Variant { selector, ..base };
        match self {
            VariantRow::Base => base,
            VariantRow::ResblockLinearRelu => Variant {
                resblock: ResBlockVariant::LinearRelu,
                ..base
            },
            VariantRow::SelectorConcat => selector(SelectorVariant::Concat),
            VariantRow::SelectorAdd => selector(SelectorVariant::Add),
            VariantRow::SelectorHadamard => selector(SelectorVariant::Hadamard),
            VariantRow::SelectorStage1Only => selector(SelectorVariant::Stage1Only),
            VariantRow::SelectorStage2Only => selector(SelectorVariant::Stage2Only),
            VariantRow::FabConcat => Variant {
                fab: FabVariant::ConcatLinearRelu,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Global,
    TrainFold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepSourceArg {
    Raw,
    Processed,
}

/// Settings shared by every command that trains.
#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Initial learning rate, annealed to 0 on a cosine.
    #[arg(long, default_value_t = DEFAULT_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    /// Epochs without validation-loss improvement before stopping; 0 disables.
    #[arg(long, default_value_t = DEFAULT_PATIENCE)]
    pub patience: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Where min-max statistics come from.
    #[arg(long, value_enum, default_value_t = NormArg::TrainFold)]
    pub norm: NormArg,
    #[arg(long, value_enum, default_value_t = VariantRow::Base)]
    pub variant: VariantRow,
    /// What the fusion block receives as the step message.
    #[arg(long, value_enum, default_value_t = StepSourceArg::Raw)]
    pub fab_step_source: StepSourceArg,
    /// Ignore the dataset's embedding columns.
    #[arg(long)]
    pub no_embedding: bool,
    #[arg(long, env = "SELNET_SEED", default_value_t = 42)]
    pub seed: u64,
}

impl TrainingArgs {
    pub fn experiment(&self, parallel: bool) -> ExperimentConfig {
        ExperimentConfig {
            folds: self.folds,
            norm: match self.norm {
                NormArg::Global => NormPolicy::Global,
                NormArg::TrainFold => NormPolicy::TrainFold,
            },
            train: TrainConfig {
                lr: self.lr,
                epochs: self.epochs,
                batch_size: self.batch_size,
                patience: self.patience,
                threshold: self.threshold,
                seed: self.seed,
            },
            steps: self.steps,
            variant: self.variant.variant(),
            fab_step_source: match self.fab_step_source {
                StepSourceArg::Raw => FabStepSource::Raw,
                StepSourceArg::Processed => FabStepSource::Processed,
            },
            seed: self.seed,
            use_embedding: !self.no_embedding,
            parallel,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset CSV with a `label` column and optional `emb_*` columns.
    #[arg(long)]
    pub data: PathBuf,
    /// New run directory; must not exist.
    #[arg(long)]
    pub out: PathBuf,
    /// Also cross-validate the logistic reference on the same folds.
    #[arg(long)]
    pub compare_logistic: bool,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct ModelInput {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Min-max statistics; defaults to `<checkpoint stem>.norm.csv` next to the checkpoint.
    #[arg(long, conflicts_with = "prenormalized")]
    pub norm_stats: Option<PathBuf>,
    /// The data is already scaled; skip normalization.
    #[arg(long)]
    pub prenormalized: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: ModelInput,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub input: ModelInput,
    /// Also write `<out stem>.step<k>.csv` for each step.
    #[arg(long)]
    pub per_step: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comparison table, one row per variant.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Number of uniform noise features to append.
    #[arg(long, default_value_t = 30)]
    pub noise: usize,
    /// Comma-separated informative feature names; defaults to the `inf_*` columns.
    #[arg(long, value_delimiter = ',')]
    pub informative: Vec<String>,
    /// Per-feature mean attention table.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingArgs,
}
