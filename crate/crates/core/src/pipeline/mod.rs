//! Dataset handling, k-fold training and evaluation, and the experiments
//! built on them.

mod dataset;
mod experiment;
mod folds;
mod logistic;
mod metrics;
mod synth;
mod train;

#[cfg(test)]
mod tests;

pub use dataset::{
    load_dataset, normalize, read_dataset, Dataset, NormPolicy, NormStats, EMBED_PREFIX, FLAG_SUFFIX, ID_COLUMN,
    LABEL_COLUMN,
};
pub use experiment::{
    ablate, attention_for, create_run_dir, cross_validate, cross_validate_logistic, cross_validate_selectornet,
    default_informative, fold_checkpoint_path, fold_norm_path, noise_experiment, write_ablation_csv,
    write_history_csv, write_metrics_csv, write_run, AblationRow, CvReport, ExperimentConfig, FoldOutcome,
    NoiseReport,
};
pub use folds::{kfold_split, FoldSplit};
pub use logistic::LogisticModel;
pub use metrics::{MetricSummary, Metrics, RATE_NAMES};
pub use synth::{
    embed_stub, noise_columns, synth_generate, SynthConfig, INFORMATIVE_PREFIX, NOISE_PREFIX, NUISANCE_PREFIX,
};
pub use train::{
    evaluate, mean_loss, train, EpochRecord, TrainConfig, TrainOutcome, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS,
    DEFAULT_LR, DEFAULT_PATIENCE, DEFAULT_THRESHOLD,
};
