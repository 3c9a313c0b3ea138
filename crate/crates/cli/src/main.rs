mod args;

use std::collections::HashMap;
use std::error::Error;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use selnet_core::pipeline::{
    ablate, attention_for, cross_validate_logistic, cross_validate_selectornet, default_informative, embed_stub,
    evaluate, load_dataset, noise_experiment, synth_generate, write_ablation_csv, write_metrics_csv, write_run,
    Dataset, NormStats, SynthConfig,
};
use selnet_core::selectornet::{load_checkpoint, AttentionReport, SelectorNet};
use selnet_tongue::{
    extract_all, read_detections, read_physio, write_feature_csv, AspectRule, ExtractConfig, FeatureSchema,
    GlcmConfig,
};

use args::{AblateArgs, AspectArg, Cli, Command, EvalArgs, ExplainArgs, ExtractArgs, ModelInput, PerturbArgs, SynthArgs, TrainArgs};

type CliResult<T = ()> = Result<T, Box<dyn Error>>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        // help and version exit 0, usage errors exit 2
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let parallel = !cli.single_thread;
    match cli.command {
        Command::Extract(a) => extract(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a, parallel),
        Command::Eval(a) => eval(a),
        Command::Explain(a) => explain(a),
        Command::Ablate(a) => ablation(a, parallel),
        Command::Perturb(a) => perturb(a, parallel),
    }
}

fn read_embeddings(path: &Path) -> CliResult<HashMap<String, Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let id = header
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| format!("{}: missing column \"id\"", path.display()))?;
    let cols: Vec<usize> = (0..)
        .map_while(|k| header.iter().position(|h| h == format!("emb_{k}")))
        .collect();
    let mut out = HashMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let values = cols
            .iter()
            .map(|&c| {
                rec[c]
                    .parse::<f64>()
                    .map_err(|_| format!("{}, row {}, column {}: not a number", path.display(), r + 1, &header[c]))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        out.insert(rec[id].to_string(), values);
    }
    Ok(out)
}

fn extract(a: ExtractArgs) -> CliResult {
    let physio = read_physio(&a.physio)?;
    let detections = match &a.detections {
        Some(p) => read_detections(p)?,
        None => Default::default(),
    };
    let config = ExtractConfig {
        glcm: GlcmConfig {
            levels: a.levels,
            distance: a.distance,
            ..GlcmConfig::default()
        },
        aspect: match a.aspect {
            AspectArg::HeightOverWidth => AspectRule::HeightOverWidth,
            AspectArg::WidthOverHeight => AspectRule::WidthOverHeight,
        },
    };
    let schema = FeatureSchema::canonical();
    let mut rows = extract_all(&a.images, &a.masks, &physio, &detections, &schema, &config)?;
    if let Some(path) = &a.embeddings {
        let table = read_embeddings(path)?;
        for row in &mut rows {
            let e = table
                .get(&row.id)
                .ok_or_else(|| format!("{}: no embedding for {}", path.display(), row.id))?;
            row.embedding = Some(e.clone());
        }
    } else if a.stub_embed {
        for row in &mut rows {
            row.embedding = Some(embed_stub(&row.id, a.embed_dim));
        }
    }
    write_feature_csv(File::create(&a.out)?, &schema, &rows)?;
    eprintln!("extracted {} subjects to {}", rows.len(), a.out.display());
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult {
    let config = SynthConfig {
        shift: a.shift,
        interaction: a.interaction,
        embed_dim: a.embed_dim,
        ..SynthConfig::new(a.n, a.informative, a.nuisance, a.seed)
    };
    let ds = synth_generate(&config)?;
    ds.save_csv(&a.out, &config.describe())?;
    eprintln!("wrote {} rows, {} features to {}", ds.len(), ds.feature_dim(), a.out.display());
    Ok(())
}

fn load(path: &Path) -> CliResult<Dataset> {
    let ds = load_dataset(path, None)?;
    eprintln!("loaded {} rows, {} features from {}", ds.len(), ds.feature_dim(), path.display());
    Ok(ds)
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn train(a: TrainArgs, parallel: bool) -> CliResult {
    let ds = load(&a.data)?;
    let config = a.training.experiment(parallel);
    if a.out.exists() {
        return Err(format!("run directory {} already exists", a.out.display()).into());
    }
    let report = cross_validate_selectornet(&ds, &config)?;
    for f in &report.folds {
        eprintln!(
            "fold {}: accuracy {:.4}, best epoch {}, {} epochs run",
            f.fold,
            f.metrics.accuracy,
            f.best_epoch.map_or_else(|| "-".into(), |e| e.to_string()),
            f.history.len()
        );
    }
    let mut extra = vec![("data".to_string(), a.data.display().to_string())];
    let baseline = if a.compare_logistic {
        let b = cross_validate_logistic(&ds, &config)?;
        extra.push(("logistic_accuracy_mean".into(), fmt_rate(b.summary.mean[0])));
        Some(b)
    } else {
        None
    };
    write_run(&a.out, &ds, &config, &report, &extra)?;
    if let Some(b) = baseline {
        write_metrics_csv(File::create(a.out.join("logistic_metrics.csv"))?, &b.fold_metrics())?;
        eprintln!("logistic accuracy {}", fmt_rate(b.summary.mean[0]));
    }
    eprintln!(
        "SelectorNet accuracy {} ± {} over {} folds; run written to {}",
        fmt_rate(report.summary.mean[0]),
        fmt_rate(report.summary.std[0]),
        report.folds.len(),
        a.out.display()
    );
    Ok(())
}

fn sibling_norm(checkpoint: &Path) -> PathBuf {
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    checkpoint.with_file_name(format!("{stem}.norm.csv"))
}

/// Loads the checkpoint and the data scaled the way the model was trained.
fn model_and_data(input: &ModelInput) -> CliResult<(SelectorNet, Dataset)> {
    let model = load_checkpoint(&input.checkpoint)?;
    let mut ds = if input.prenormalized {
        load(&input.data)?
    } else {
        let path = input.norm_stats.clone().unwrap_or_else(|| sibling_norm(&input.checkpoint));
        if !path.is_file() {
            return Err(format!(
                "normalization statistics {} not found; pass --norm-stats or --prenormalized",
                path.display()
            )
            .into());
        }
        let stats = NormStats::load_csv(&path)?;
        stats.apply_by_name(&load_dataset(&input.data, Some(&stats.feature_names))?)?
    };
    if model.config().embed_dim == 0 {
        ds = ds.without_embedding();
    }
    Ok((model, ds))
}

fn eval(a: EvalArgs) -> CliResult {
    let (model, ds) = model_and_data(&a.input)?;
    let m = evaluate(&model, &ds, a.threshold)?;
    write_metrics_csv(File::create(&a.out)?, &[m])?;
    eprintln!(
        "accuracy {:.4}, precision {}, recall {}, specificity {}",
        m.accuracy,
        fmt_rate(m.precision),
        fmt_rate(m.recall),
        fmt_rate(m.specificity)
    );
    Ok(())
}

fn explain(a: ExplainArgs) -> CliResult {
    let (model, ds) = model_and_data(&a.input)?;
    let report = attention_for(&model, &ds)?;
    report.save_csv(&a.out)?;
    if a.per_step {
        let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("attention");
        for (k, m) in report.per_step.iter().enumerate() {
            let step = AttentionReport {
                feature_names: report.feature_names.clone(),
                per_step: Vec::new(),
                total: m.clone(),
            };
            step.save_csv(&a.out.with_file_name(format!("{stem}.step{k}.csv")))?;
        }
    }
    eprintln!("attention for {} samples written to {}", ds.len(), a.out.display());
    Ok(())
}

fn ablation(a: AblateArgs, parallel: bool) -> CliResult {
    let ds = load(&a.data)?;
    let rows = ablate(&ds, &a.training.experiment(parallel))?;
    write_ablation_csv(File::create(&a.out)?, &rows)?;
    for r in &rows {
        eprintln!(
            "{:<24} {:<22} accuracy {} ± {}{}",
            r.module,
            r.replacement,
            fmt_rate(r.summary.mean[0]),
            fmt_rate(r.summary.std[0]),
            if r.complete { "" } else { "  (incomplete)" }
        );
    }
    if let Some(r) = rows.iter().find(|r| !r.complete) {
        return Err(format!("variant {} / {} left a metric undefined", r.module, r.replacement).into());
    }
    Ok(())
}

fn perturb(a: PerturbArgs, parallel: bool) -> CliResult {
    let ds = load(&a.data)?;
    let informative = if a.informative.is_empty() {
        default_informative(&ds)
    } else {
        a.informative.clone()
    };
    let report = noise_experiment(&ds, a.noise, &informative, &a.training.experiment(parallel))?;
    report.write_csv(File::create(&a.out)?)?;
    eprintln!(
        "informative mean attention {:.6}, noise mean {}, ratio {}, top feature {} ({})",
        report.informative_mean,
        report.noise_mean.map_or_else(|| "n/a".into(), |v| format!("{v:.6}")),
        report.ratio.map_or_else(|| "n/a".into(), |v| format!("{v:.3}")),
        report.top_feature,
        if report.top_is_informative() { "informative" } else { "not informative" }
    );
    Ok(())
}
