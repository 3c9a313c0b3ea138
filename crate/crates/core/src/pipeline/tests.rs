use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use std::collections::HashSet;

use super::*;
use crate::error::{DataError, Error};
use crate::numeric::module::flat_params;
use crate::numeric::Matrix;
use crate::selectornet::{SelectorNet, SelectorNetConfig};

fn parse(text: &str) -> crate::Result<Dataset> {
    read_dataset(text.as_bytes(), None)
}

fn small_config(epochs: usize) -> ExperimentConfig {
    ExperimentConfig {
        train: TrainConfig {
            epochs,
            batch_size: 64,
            ..TrainConfig::default()
        },
        steps: 2,
        parallel: false,
        ..ExperimentConfig::default()
    }
}

#[test]
fn loads_well_formed_file() {
    let ds = parse("# comment\nid,a,b,emb_0,emb_1,label\nx,1,2,0.1,0.2,1\ny,3,4,0.3,0.4,0\nz,5,6,0.5,0.6,1\n").unwrap();
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.feature_names, ["a", "b"]);
    assert_eq!(ds.embed_dim(), 2);
    assert_eq!(ds.features.row(2), &[5.0, 6.0]);
    assert_eq!(ds.ids.as_deref().unwrap()[1], "y");
    assert_eq!(ds.labels, [1.0, 0.0, 1.0]);
}

#[test]
fn flag_columns_are_not_features() {
    let ds = parse("a,coat_valid,label\n1,1,0\n2,0,1\n").unwrap();
    assert_eq!(ds.feature_names, ["a"]);
}

#[test]
fn schema_selects_and_orders_columns() {
    let schema = vec!["b".to_string(), "a".to_string()];
    let ds = read_dataset("a,b,c,label\n1,2,3,0\n".as_bytes(), Some(&schema)).unwrap();
    assert_eq!(ds.feature_names, schema);
    assert_eq!(ds.features.row(0), &[2.0, 1.0]);
}

#[test]
fn missing_schema_column_is_named() {
    let schema = vec!["Weight".to_string(), "BMI".to_string()];
    let err = read_dataset("Weight,label\n60,1\n".as_bytes(), Some(&schema)).unwrap_err();
    assert!(matches!(err, Error::Data(DataError::MissingColumn(ref c)) if c == "BMI"), "{err}");
    assert!(err.to_string().contains("BMI"));
}

#[test]
fn missing_label_column() {
    let err = parse("a,b\n1,2\n").unwrap_err();
    assert!(matches!(err, Error::Data(DataError::MissingColumn(ref c)) if c == "label"));
}

#[test]
fn label_domain_error_cites_row() {
    let mut text = String::from("a,label\n");
    for i in 1..=9 {
        text.push_str(&format!("{i},{}\n", if i == 7 { 2 } else { i % 2 }));
    }
    let err = parse(&text).unwrap_err();
    assert!(matches!(err, Error::Data(DataError::LabelDomain { row: 7, .. })), "{err}");
    assert!(err.to_string().contains("row 7"));
}

#[test]
fn non_numeric_cell_names_row_and_column() {
    let err = parse("a,b,label\n1,2,0\n1,oops,1\n").unwrap_err();
    match err {
        Error::Data(DataError::NotNumeric { row, column, value }) => {
            assert_eq!((row, column.as_str(), value.as_str()), (2, "b", "oops"));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let ds = synth_generate(&SynthConfig::new(120, 2, 3, 5)).unwrap();
    let mut buf = Vec::new();
    ds.write_csv(&mut buf, &["header".into()]).unwrap();
    let back = read_dataset(buf.as_slice(), None).unwrap();
    assert_eq!(back, ds);
}

fn column(values: &[f64]) -> Dataset {
    let n = values.len();
    Dataset::new(
        vec!["k".into()],
        Matrix::from_vec(n, 1, values.to_vec()).unwrap(),
        vec![0.0; n],
        Matrix::zeros(n, 0),
        None,
    )
    .unwrap()
}

#[test]
fn min_max_examples() {
    let ds = column(&[2.0, 7.0, 12.0]);
    let (n, stats) = normalize(&ds, NormPolicy::Global, &[]).unwrap();
    assert_eq!(n.features.data(), &[0.0, 0.5, 1.0]);
    assert_eq!((stats.min[0], stats.max[0]), (2.0, 12.0));

    let (c, _) = normalize(&column(&[3.0, 3.0, 3.0]), NormPolicy::Global, &[]).unwrap();
    assert_eq!(c.features.data(), &[0.0, 0.0, 0.0]);
}

#[test]
fn train_fold_policy_clamps_unseen_rows() {
    let ds = column(&[2.0, 12.0, -5.0, 30.0, 7.0]);
    let (n, _) = normalize(&ds, NormPolicy::TrainFold, &[0, 1]).unwrap();
    assert_eq!(n.features.data(), &[0.0, 1.0, 0.0, 1.0, 0.5]);
    assert!(matches!(
        normalize(&ds, NormPolicy::TrainFold, &[]),
        Err(Error::Empty(_))
    ));
}

#[test]
fn norm_stats_file_round_trip() {
    let ds = synth_generate(&SynthConfig::new(100, 2, 2, 1)).unwrap();
    let (_, stats) = normalize(&ds, NormPolicy::TrainFold, &[0, 5, 9]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.csv");
    stats.save_csv(&path).unwrap();
    assert_eq!(NormStats::load_csv(&path).unwrap(), stats);
}

#[test]
fn kfold_examples() {
    let s = kfold_split(10, 5, 3).unwrap();
    assert!(s.folds.iter().all(|f| f.len() == 2));
    let mut all: Vec<usize> = s.folds.concat();
    all.sort_unstable();
    assert_eq!(all, (0..10).collect::<Vec<_>>());

    let mut sizes: Vec<usize> = kfold_split(11, 5, 3).unwrap().folds.iter().map(Vec::len).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, [2, 2, 2, 2, 3]);

    assert_eq!(kfold_split(50, 5, 9).unwrap(), kfold_split(50, 5, 9).unwrap());
    assert!(kfold_split(4, 5, 0).is_err());
}

#[test]
fn metric_examples() {
    let m = Metrics::from_counts(8, 6, 2, 4).unwrap();
    assert_abs_diff_eq!(m.accuracy, 0.7, epsilon = 1e-15);
    assert_abs_diff_eq!(m.precision.unwrap(), 0.8, epsilon = 1e-15);
    assert_abs_diff_eq!(m.recall.unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    assert_abs_diff_eq!(m.specificity.unwrap(), 0.75, epsilon = 1e-15);

    let perfect = Metrics::from_predictions(&[0.9, 0.1, 0.5], &[1.0, 0.0, 1.0], 0.5).unwrap();
    assert_eq!(perfect.rates(), [Some(1.0); 4]);

    let none_positive = Metrics::from_predictions(&[0.1, 0.2], &[1.0, 0.0], 0.5).unwrap();
    assert_eq!(none_positive.precision, None);
    assert_eq!(none_positive.specificity, Some(1.0));

    assert!(Metrics::from_counts(0, 0, 0, 0).is_err());
}

#[test]
fn summary_uses_sample_std() {
    let folds = [
        Metrics::from_counts(1, 1, 0, 0).unwrap(),
        Metrics::from_counts(1, 0, 1, 0).unwrap(),
    ];
    let s = MetricSummary::from_folds(&folds);
    assert_abs_diff_eq!(s.mean[0].unwrap(), 0.75, epsilon = 1e-15);
    assert_abs_diff_eq!(s.std[0].unwrap(), (0.125f64).sqrt(), epsilon = 1e-15);
}

#[test]
fn zero_epochs_leave_model_untouched() {
    let ds = synth_generate(&SynthConfig::new(100, 2, 2, 1)).unwrap();
    let model = SelectorNet::new(SelectorNetConfig::new(4).with_steps(1)).unwrap();
    let before = flat_params(&model);
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let out = train(model, &ds, Some(&ds), &cfg).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.best_epoch, None);
    assert_eq!(flat_params(&out.model), before);
}

#[test]
fn history_follows_cosine_schedule() {
    let ds = synth_generate(&SynthConfig::new(100, 2, 2, 1)).unwrap();
    let (ds, _) = normalize(&ds, NormPolicy::Global, &[]).unwrap();
    let cfg = TrainConfig {
        epochs: 6,
        batch_size: 32,
        patience: 0,
        ..TrainConfig::default()
    };
    let out = train(LogisticModel::new(4, 10, 0), &ds, None, &cfg).unwrap();
    assert_eq!(out.history.len(), 6);
    for h in &out.history {
        let expected = cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * h.epoch as f64 / 6.0).cos());
        assert_abs_diff_eq!(h.lr, expected, epsilon = 1e-15);
        assert!(h.val_loss.is_none());
    }
}

#[test]
fn rejects_tiny_batches() {
    let ds = synth_generate(&SynthConfig::new(100, 2, 2, 1)).unwrap();
    let cfg = TrainConfig {
        batch_size: 1,
        ..TrainConfig::default()
    };
    assert!(train(LogisticModel::new(4, 10, 0), &ds, None, &cfg).is_err());
}

#[test]
fn divergence_reports_location() {
    let ds = column(&[0.0, 1.0, 0.5, 0.25]);
    let ds = Dataset {
        labels: vec![0.0, 1.0, 1.0, 0.0],
        ..ds
    };
    let mut model = LogisticModel::new(1, 0, 0);
    model.linear.weight.value.set(0, 0, f64::NAN);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 2,
        ..TrainConfig::default()
    };
    match train(model, &ds, None, &cfg) {
        Err(Error::Diverged { epoch, batch, lr, .. }) => {
            assert_eq!((epoch, batch), (0, 0));
            assert_eq!(lr, cfg.lr);
        }
        other => panic!("{other:?}"),
    }
}

/// Two well-separated Gaussian blobs along a random direction.
fn separable(n: usize, seed: u64) -> Dataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y = (i % 2) as f64;
        let margin = if y == 1.0 { 0.3 } else { -0.3 };
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        data.extend([a, b, (a + b) / 2.0 + margin]);
        labels.push(y);
    }
    Dataset::new(
        vec!["a".into(), "b".into(), "c".into()],
        Matrix::from_vec(n, 3, data).unwrap(),
        labels,
        Matrix::zeros(n, 0),
        None,
    )
    .unwrap()
}

#[test]
fn logistic_separates_margin_data() {
    let ds = separable(400, 3);
    let cfg = ExperimentConfig {
        train: TrainConfig {
            epochs: 200,
            batch_size: 32,
            ..TrainConfig::default()
        },
        ..small_config(0)
    };
    let a = cross_validate_logistic(&ds, &cfg).unwrap();
    assert!(a.summary.accuracy() >= 0.95, "{:?}", a.summary);
    let b = cross_validate_logistic(&ds, &cfg).unwrap();
    assert_eq!(a.fold_metrics(), b.fold_metrics());
}

#[test]
fn logistic_on_random_labels_is_near_chance() {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut ds = synth_generate(&SynthConfig::new(1000, 3, 3, 8)).unwrap();
    ds.labels.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
    let cfg = ExperimentConfig {
        train: TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        },
        ..small_config(0)
    };
    let acc = cross_validate_logistic(&ds, &cfg).unwrap().summary.accuracy();
    assert!((acc - 0.5).abs() <= 0.1, "{acc}");
}

#[test]
fn synth_shape_balance_and_header() {
    let cfg = SynthConfig::new(2000, 5, 15, 42);
    let ds = synth_generate(&cfg).unwrap();
    assert_eq!((ds.len(), ds.feature_dim(), ds.embed_dim()), (2000, 20, 10));
    let rate = ds.positive_rate();
    assert!((0.45..=0.55).contains(&rate), "{rate}");
    assert!(ds.feature_names[..5].iter().all(|n| n.starts_with(INFORMATIVE_PREFIX)));
    assert!(cfg.describe().iter().any(|l| l.contains("seed = 42")));
    assert!(synth_generate(&SynthConfig::new(99, 1, 1, 0)).is_err());
}

#[test]
fn synth_csv_is_bitwise_reproducible() {
    let cfg = SynthConfig::new(300, 3, 4, 11);
    let render = || {
        let mut buf = Vec::new();
        synth_generate(&cfg).unwrap().write_csv(&mut buf, &cfg.describe()).unwrap();
        buf
    };
    assert_eq!(render(), render());
}

#[test]
fn informative_features_shift_with_the_label() {
    let ds = synth_generate(&SynthConfig::new(4000, 2, 1, 3)).unwrap();
    let mean = |col: usize, y: f64| {
        let v: Vec<f64> = (0..ds.len()).filter(|&r| ds.labels[r] == y).map(|r| ds.features.get(r, col)).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!((mean(0, 1.0) - mean(0, 0.0) - 1.0).abs() < 0.1);
    assert!((mean(2, 1.0) - mean(2, 0.0)).abs() < 0.1);
}

#[test]
fn embed_stub_contract() {
    assert_eq!(embed_stub("a", 10), embed_stub("a", 10));
    assert_eq!(embed_stub("a", 10).len(), 10);
    assert!(embed_stub("a", 0).is_empty());
    let vectors: HashSet<Vec<u64>> = (0..2000)
        .map(|i| embed_stub(&format!("s{i:05}"), 10).iter().map(|v| v.to_bits()).collect())
        .collect();
    assert_eq!(vectors.len(), 2000);
    assert!(embed_stub("b", 10).iter().all(|v| (0.0..1.0).contains(v)));
}

#[test]
fn fold_metrics_do_not_depend_on_threading() {
    let ds = synth_generate(&SynthConfig::new(200, 2, 2, 4)).unwrap();
    let serial = cross_validate_selectornet(&ds, &small_config(3)).unwrap();
    let parallel = cross_validate_selectornet(
        &ds,
        &ExperimentConfig {
            parallel: true,
            ..small_config(3)
        },
    )
    .unwrap();
    assert_eq!(serial.fold_metrics(), parallel.fold_metrics());
    for (a, b) in serial.folds.iter().zip(&parallel.folds) {
        assert_eq!(flat_params(&a.model), flat_params(&b.model));
    }
}

#[test]
fn run_directory_contents_and_refusal() {
    let ds = synth_generate(&SynthConfig::new(150, 2, 2, 4)).unwrap();
    let cfg = small_config(2);
    let report = cross_validate_selectornet(&ds, &cfg).unwrap();
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("runs/r1");
    write_run(&dir, &ds, &cfg, &report, &[]).unwrap();
    for name in ["metrics.csv", "history.csv", "attention.csv", "manifest.txt", "fold0.ckpt", "fold4.norm.csv"] {
        assert!(dir.join(name).exists(), "{name}");
    }
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines.len(), 1 + 5 + 2);
    assert!(lines[6].starts_with("mean,") && lines[7].starts_with("std,"));
    let manifest = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 42") && manifest.contains("lr = 0.4637"));

    let err = write_run(&dir, &ds, &cfg, &report, &[]).unwrap_err();
    assert!(err.to_string().contains("already exists"));
}

#[test]
fn noise_report_shapes() {
    let ds = synth_generate(&SynthConfig::new(150, 2, 2, 4)).unwrap();
    let cfg = small_config(2);
    let inf = default_informative(&ds);
    assert_eq!(inf, ["inf_0", "inf_1"]);

    let r = noise_experiment(&ds, 30, &inf, &cfg).unwrap();
    assert_eq!(r.mean_attention.len(), 4 + 30);
    assert_eq!(r.attention.total.cols(), 34);
    assert_eq!(r.noise.len(), 30);
    assert!(r.ratio.is_some());

    let plain = noise_experiment(&ds, 0, &inf, &cfg).unwrap();
    assert_eq!(plain.feature_names, ds.feature_names);
    assert_eq!(plain.ratio, None);
    // n_noise = 0 is the plain attention report of the same fold-0 model
    let split = kfold_split(ds.len(), cfg.folds, cfg.seed).unwrap();
    let (normed, _) = normalize(&ds, cfg.norm, &split.training(0)).unwrap();
    let train_set = normed.subset(&split.training(0));
    let val = normed.subset(split.validation(0));
    let model = SelectorNet::new(cfg.net_config(4, 10, cfg.fold_seed(0))).unwrap();
    let out = train(model, &train_set, Some(&val), &TrainConfig { seed: cfg.fold_seed(0), ..cfg.train.clone() }).unwrap();
    assert_eq!(attention_for(&out.model, &val).unwrap(), plain.attention);
}

proptest! {
    #[test]
    fn folds_partition_rows(n in 1usize..300, k in 1usize..12, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let s = kfold_split(n, k, seed).unwrap();
        let mut seen = vec![false; n];
        for f in &s.folds {
            for &i in f {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&v| v));
        let sizes: Vec<usize> = s.folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for fold in 0..k {
            prop_assert_eq!(s.training(fold).len() + s.validation(fold).len(), n);
        }
    }

    #[test]
    fn metric_identities(tp in 0usize..500, tn in 0usize..500, fp in 0usize..500, fn_ in 0usize..500) {
        prop_assume!(tp + tn + fp + fn_ > 0);
        let m = Metrics::from_counts(tp, tn, fp, fn_).unwrap();
        let total = (tp + tn + fp + fn_) as f64;
        prop_assert_eq!(m.accuracy, (tp + tn) as f64 / total);
        prop_assert_eq!(m.precision, (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64));
        prop_assert_eq!(m.recall, (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64));
        prop_assert_eq!(m.specificity, (tn + fp > 0).then(|| tn as f64 / (tn + fp) as f64));
        for r in m.rates().into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn train_fold_features_stay_in_unit_interval(seed in 0u64..50) {
        let ds = synth_generate(&SynthConfig::new(120, 3, 2, seed)).unwrap();
        let split = kfold_split(ds.len(), 5, seed).unwrap();
        let train_rows = split.training(0);
        let (n, _) = normalize(&ds, NormPolicy::TrainFold, &train_rows).unwrap();
        prop_assert!(n.features.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let col0: Vec<f64> = train_rows.iter().map(|&r| n.features.get(r, 0)).collect();
        prop_assert!(col0.contains(&0.0) && col0.contains(&1.0));
    }
}
