//! K-fold experiments, run directories, the noise-perturbation study and the
//! ablation sweep.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::dataset::{normalize, Dataset, NormPolicy, NormStats};
use super::folds::{kfold_split, FoldSplit};
use super::logistic::LogisticModel;
use super::metrics::{MetricSummary, Metrics, RATE_NAMES};
use super::synth::{noise_columns, INFORMATIVE_PREFIX, NOISE_PREFIX};
use super::train::{evaluate, train, EpochRecord, TrainConfig};
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::selectornet::{
    attention, save_checkpoint, AttentionReport, FabStepSource, SelectorNet, SelectorNetConfig, Variant,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub norm: NormPolicy,
    pub train: TrainConfig,
    pub steps: usize,
    pub variant: Variant,
    pub fab_step_source: FabStepSource,
    /// Split seed; fold `k` initializes and shuffles with `seed + k`.
    pub seed: u64,
    /// Feed the dataset's embedding columns to the head.
    pub use_embedding: bool,
    /// Train folds on the rayon pool. Results do not depend on this.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            norm: NormPolicy::TrainFold,
            train: TrainConfig::default(),
            steps: crate::selectornet::DEFAULT_STEPS,
            variant: Variant::default(),
            fab_step_source: FabStepSource::Raw,
            seed: 42,
            use_embedding: true,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    pub fn fold_seed(&self, fold: usize) -> u64 {
        self.seed.wrapping_add(fold as u64)
    }

    pub fn net_config(&self, feature_dim: usize, embed_dim: usize, seed: u64) -> SelectorNetConfig {
        let mut c = SelectorNetConfig::new(feature_dim)
            .with_steps(self.steps)
            .with_embed_dim(embed_dim)
            .with_seed(seed)
            .with_variant(self.variant);
        c.fab_step_source = self.fab_step_source;
        c
    }

    /// `key = value` lines covering every setting.
    pub fn manifest(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let _ = writeln!(s, "folds = {}", self.folds);
        let _ = writeln!(s, "norm = {}", self.norm);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "fold_seeds = seed + fold");
        let _ = writeln!(s, "lr = {}", t.lr);
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "patience = {}", t.patience);
        let _ = writeln!(s, "threshold = {}", t.threshold);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "selector = {}", self.variant.selector);
        let _ = writeln!(s, "fab = {}", self.variant.fab);
        let _ = writeln!(s, "resblock = {}", self.variant.resblock);
        let _ = writeln!(s, "fab_step_source = {}", self.fab_step_source);
        let _ = writeln!(s, "use_embedding = {}", self.use_embedding);
        s
    }
}

#[derive(Debug, Clone)]
pub struct FoldOutcome<C> {
    pub fold: usize,
    pub model: C,
    pub norm: NormStats,
    pub val_rows: Vec<usize>,
    pub metrics: Metrics,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CvReport<C> {
    pub split: FoldSplit,
    pub folds: Vec<FoldOutcome<C>>,
    pub summary: MetricSummary,
}

impl<C> CvReport<C> {
    pub fn fold_metrics(&self) -> Vec<Metrics> {
        self.folds.iter().map(|f| f.metrics).collect()
    }

    /// Highest validation accuracy, lowest fold index on ties.
    pub fn best_fold(&self) -> &FoldOutcome<C> {
        let mut best = &self.folds[0];
        for f in &self.folds[1..] {
            if f.metrics.accuracy > best.metrics.accuracy {
                best = f;
            }
        }
        best
    }
}

fn model_view(ds: &Dataset, use_embedding: bool) -> Dataset {
    if use_embedding {
        ds.clone()
    } else {
        ds.without_embedding()
    }
}

pub fn cross_validate<C, M>(ds: &Dataset, config: &ExperimentConfig, make: M) -> Result<CvReport<C>>
where
    C: Classifier,
    M: Fn(&Dataset, u64) -> Result<C> + Sync,
{
    let ds = model_view(ds, config.use_embedding);
    let split = kfold_split(ds.len(), config.folds, config.seed)?;
    let run = |fold: usize| -> Result<FoldOutcome<C>> {
        let train_rows = split.training(fold);
        let val_rows = split.validation(fold).to_vec();
        let (normed, norm) = normalize(&ds, config.norm, &train_rows)?;
        let train_set = normed.subset(&train_rows);
        let val_set = normed.subset(&val_rows);
        let seed = config.fold_seed(fold);
        let model = make(&train_set, seed)?;
        let tc = TrainConfig {
            seed,
            ..config.train.clone()
        };
        let out = train(model, &train_set, Some(&val_set), &tc)?;
        let metrics = evaluate(&out.model, &val_set, tc.threshold)?;
        Ok(FoldOutcome {
            fold,
            model: out.model,
            norm,
            val_rows,
            metrics,
            history: out.history,
            best_epoch: out.best_epoch,
        })
    };
    let folds: Vec<FoldOutcome<C>> = if config.parallel {
        (0..config.folds).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..config.folds).map(run).collect::<Result<_>>()?
    };
    let summary = MetricSummary::from_folds(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>());
    Ok(CvReport { split, folds, summary })
}

pub fn cross_validate_selectornet(ds: &Dataset, config: &ExperimentConfig) -> Result<CvReport<SelectorNet>> {
    cross_validate(ds, config, |train_set, seed| {
        SelectorNet::new(config.net_config(train_set.feature_dim(), train_set.embed_dim(), seed))
    })
}

pub fn cross_validate_logistic(ds: &Dataset, config: &ExperimentConfig) -> Result<CvReport<LogisticModel>> {
    cross_validate(ds, config, |train_set, seed| {
        Ok(LogisticModel::new(train_set.feature_dim(), train_set.embed_dim(), seed))
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-fold rows followed by `mean` and `std` rows (sample standard deviation).
/// Undefined rates are empty cells.
pub fn write_metrics_csv<W: Write>(out: W, folds: &[Metrics]) -> Result<()> {
    let summary = MetricSummary::from_folds(folds);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["fold", "tp", "tn", "fp", "fn"];
    header.extend(RATE_NAMES);
    w.write_record(&header)?;
    for (k, m) in folds.iter().enumerate() {
        let mut rec = vec![
            k.to_string(),
            m.tp.to_string(),
            m.tn.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
        ];
        rec.extend(m.rates().iter().map(|r| fmt_opt(*r)));
        w.write_record(&rec)?;
    }
    for (label, vals) in [("mean", summary.mean), ("std", summary.std)] {
        let mut rec = vec![label.to_string(), String::new(), String::new(), String::new(), String::new()];
        rec.extend(vals.iter().map(|v| fmt_opt(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history_csv<W: Write, C>(out: W, folds: &[FoldOutcome<C>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fold", "epoch", "lr", "train_loss", "val_loss"])?;
    for f in folds {
        for h in &f.history {
            w.write_record([
                f.fold.to_string(),
                h.epoch.to_string(),
                h.lr.to_string(),
                h.train_loss.to_string(),
                fmt_opt(h.val_loss),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Attention over `data` (already normalized) with the model in inference mode.
pub fn attention_for(model: &SelectorNet, data: &Dataset) -> Result<AttentionReport> {
    let out = model.predict(&data.features, &data.embed)?;
    attention(&out.traces)?.with_feature_names(&data.feature_names)
}

/// Creates `dir`, failing if it already exists.
pub fn create_run_dir(dir: &Path) -> Result<()> {
    if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::create_dir(dir).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::Precondition(format!(
                "run directory {} already exists; choose a new one",
                dir.display()
            ))
        } else {
            e.into()
        }
    })
}

pub fn fold_checkpoint_path(dir: &Path, fold: usize) -> PathBuf {
    dir.join(format!("fold{fold}.ckpt"))
}

pub fn fold_norm_path(dir: &Path, fold: usize) -> PathBuf {
    dir.join(format!("fold{fold}.norm.csv"))
}

/// Writes metrics, history, attention of the best fold, per-fold checkpoints
/// and normalization statistics, and a manifest.
pub fn write_run(
    dir: &Path,
    ds: &Dataset,
    config: &ExperimentConfig,
    report: &CvReport<SelectorNet>,
    extra_manifest: &[(String, String)],
) -> Result<()> {
    create_run_dir(dir)?;
    write_metrics_csv(std::fs::File::create(dir.join("metrics.csv"))?, &report.fold_metrics())?;
    write_history_csv(std::fs::File::create(dir.join("history.csv"))?, &report.folds)?;
    for f in &report.folds {
        save_checkpoint(&f.model, &fold_checkpoint_path(dir, f.fold))?;
        f.norm.save_csv(&fold_norm_path(dir, f.fold))?;
    }
    let best = report.best_fold();
    let view = model_view(ds, config.use_embedding);
    let val = best.norm.apply(&view)?.subset(&best.val_rows);
    attention_for(&best.model, &val)?.save_csv(&dir.join("attention.csv"))?;

    let mut manifest = config.manifest();
    let _ = writeln!(manifest, "rows = {}", ds.len());
    let _ = writeln!(manifest, "features = {}", ds.feature_dim());
    let _ = writeln!(manifest, "embed_dim = {}", view.embed_dim());
    let _ = writeln!(manifest, "attention_fold = {}", best.fold);
    for f in &report.folds {
        let _ = writeln!(
            manifest,
            "fold{}_best_epoch = {}",
            f.fold,
            f.best_epoch.map(|e| e.to_string()).unwrap_or_else(|| "none".into())
        );
    }
    for (k, v) in extra_manifest {
        let _ = writeln!(manifest, "{k} = {v}");
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport {
    pub feature_names: Vec<String>,
    /// Mean `|attn_all|` per feature over the validation rows.
    pub mean_attention: Vec<f64>,
    pub informative: Vec<String>,
    pub noise: Vec<String>,
    pub informative_mean: f64,
    /// `None` without noise features.
    pub noise_mean: Option<f64>,
    pub ratio: Option<f64>,
    pub top_feature: String,
    pub attention: AttentionReport,
    pub metrics: Metrics,
}

impl NoiseReport {
    pub fn top_is_informative(&self) -> bool {
        self.informative.contains(&self.top_feature)
    }

    /// Columns `feature,group,mean_abs_attention`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "group", "mean_abs_attention"])?;
        for (name, v) in self.feature_names.iter().zip(&self.mean_attention) {
            let group = if self.informative.contains(name) {
                "informative"
            } else if self.noise.contains(name) {
                "noise"
            } else {
                "other"
            };
            w.write_record([name.as_str(), group, &v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Features named `inf_*` if there are any, otherwise every feature.
pub fn default_informative(ds: &Dataset) -> Vec<String> {
    let planted: Vec<String> = ds
        .feature_names
        .iter()
        .filter(|n| n.starts_with(INFORMATIVE_PREFIX))
        .cloned()
        .collect();
    if planted.is_empty() {
        ds.feature_names.clone()
    } else {
        planted
    }
}

/// Appends `n_noise` uniform features, trains on every fold but the first and
/// reports attention over the first fold.
pub fn noise_experiment(
    ds: &Dataset,
    n_noise: usize,
    informative: &[String],
    config: &ExperimentConfig,
) -> Result<NoiseReport> {
    if let Some(missing) = informative.iter().find(|n| !ds.feature_names.contains(n)) {
        return Err(crate::error::DataError::MissingColumn(missing.clone()).into());
    }
    let noisy = if n_noise > 0 {
        let (names, values) = noise_columns(ds.len(), n_noise, config.seed);
        ds.with_extra_features(names, values)?
    } else {
        ds.clone()
    };
    let noisy = model_view(&noisy, config.use_embedding);
    let split = kfold_split(noisy.len(), config.folds.max(2), config.seed)?;
    let train_rows = split.training(0);
    let (normed, _) = normalize(&noisy, config.norm, &train_rows)?;
    let train_set = normed.subset(&train_rows);
    let val_set = normed.subset(split.validation(0));
    let seed = config.fold_seed(0);
    let model = SelectorNet::new(config.net_config(train_set.feature_dim(), train_set.embed_dim(), seed))?;
    let tc = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let out = train(model, &train_set, Some(&val_set), &tc)?;
    let metrics = evaluate(&out.model, &val_set, tc.threshold)?;
    let attention = attention_for(&out.model, &val_set)?;
    let mean_attention = attention.mean_abs();

    let names = &noisy.feature_names;
    let group_mean = |pred: &dyn Fn(&String) -> bool| -> Option<f64> {
        let vals: Vec<f64> = names
            .iter()
            .zip(&mean_attention)
            .filter(|(n, _)| pred(n))
            .map(|(_, v)| *v)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let informative_mean = group_mean(&|n| informative.contains(n)).unwrap_or(0.0);
    let noise: Vec<String> = names
        .iter()
        .skip(ds.feature_dim())
        .filter(|n| n.starts_with(NOISE_PREFIX))
        .cloned()
        .collect();
    let noise_mean = group_mean(&|n| noise.contains(n));
    let mut top = 0;
    for (i, v) in mean_attention.iter().enumerate() {
        if *v > mean_attention[top] {
            top = i;
        }
    }
    Ok(NoiseReport {
        feature_names: names.clone(),
        top_feature: names[top].clone(),
        mean_attention,
        informative: informative.to_vec(),
        noise,
        informative_mean,
        ratio: noise_mean.map(|m| informative_mean / m),
        noise_mean,
        attention,
        metrics,
    })
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub module: &'static str,
    pub replacement: &'static str,
    pub variant: Variant,
    pub folds: Vec<Metrics>,
    pub summary: MetricSummary,
    /// Every fold trained without divergence and every rate is defined.
    pub complete: bool,
}

/// Cross-validates every row of [`Variant::ablation_table`].
pub fn ablate(ds: &Dataset, config: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for (module, replacement, variant) in Variant::ablation_table() {
        let cfg = ExperimentConfig {
            variant,
            ..config.clone()
        };
        let report = cross_validate_selectornet(ds, &cfg)?;
        let folds = report.fold_metrics();
        let complete = folds.iter().all(Metrics::all_defined)
            && report.summary.mean.iter().chain(&report.summary.std).all(|v| v.is_some_and(f64::is_finite));
        rows.push(AblationRow {
            module,
            replacement,
            variant,
            folds,
            summary: report.summary,
            complete,
        });
    }
    Ok(rows)
}

/// One row per variant: means and standard deviations of the four rates.
pub fn write_ablation_csv<W: Write>(out: W, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["module".to_string(), "replacement".into(), "selector".into(), "fab".into(), "resblock".into()];
    for r in RATE_NAMES {
        header.push(format!("{r}_mean"));
        header.push(format!("{r}_std"));
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.module.to_string(),
            row.replacement.to_string(),
            row.variant.selector.to_string(),
            row.variant.fab.to_string(),
            row.variant.resblock.to_string(),
        ];
        for k in 0..4 {
            rec.push(fmt_opt(row.summary.mean[k]));
            rec.push(fmt_opt(row.summary.std[k]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
