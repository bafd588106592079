//! Benchmark-harness behavior on the real datasets: ingestion shapes, label
//! corruption, split stratification, determinism under parallelism, and
//! result-record serialization.

mod common;

use std::path::{Path, PathBuf};

use common::rng;
use rgml::bench::dataset::{inject_mislabels, load_dataset, LabelColumn};
use rgml::bench::{cross_validate, stratified_split, ExperimentConfig, Method, ResultRecord};

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

#[test]
fn wine_has_published_shape() {
    let ds = load_dataset(&data_file("wine.csv"), &LabelColumn::Index(0)).unwrap();
    assert_eq!((ds.len(), ds.dim(), ds.n_classes()), (178, 13, 3));
}

#[test]
fn iris_has_published_shape() {
    let ds = load_dataset(&data_file("iris.csv"), &LabelColumn::Name("species".into())).unwrap();
    assert_eq!((ds.len(), ds.dim(), ds.n_classes()), (150, 4, 3));
}

#[test]
fn wine_label_addressable_by_header_name_too() {
    let by_name = load_dataset(&data_file("wine.csv"), &LabelColumn::Name("class".into())).unwrap();
    let by_index = load_dataset(&data_file("wine.csv"), &LabelColumn::Index(0)).unwrap();
    assert_eq!(by_name.labels(), by_index.labels());
    assert_eq!(by_name.features(), by_index.features());
}

/// A 15% rate on an 89-sample training set flips exactly
/// round(0.15 * 89) = 13 labels, all different from the originals.
#[test]
fn mislabel_count_is_rounded_half_up() {
    let ds = load_dataset(&data_file("wine.csv"), &LabelColumn::Index(0)).unwrap();
    let train = ds.subset(&(0..89).collect::<Vec<_>>(), "first-89").unwrap();
    let mut r = rng(42);
    let corrupted = inject_mislabels(&train, 0.15, &mut r);
    let flipped: Vec<usize> = (0..train.len())
        .filter(|&i| corrupted.label(i) != train.label(i))
        .collect();
    assert_eq!(flipped.len(), 13);

    // Per-class rounding sends 30 + 36 + 24 of wine's 59/71/48 to training.
    let (split_train, split_test) = stratified_split(&ds, 0.5, &mut r).unwrap();
    assert_eq!((split_train.len(), split_test.len()), (90, 88));
}

#[test]
fn stratified_split_on_wine_preserves_class_shares() {
    let ds = load_dataset(&data_file("wine.csv"), &LabelColumn::Index(0)).unwrap();
    let mut r = rng(7);
    let (train, test) = stratified_split(&ds, 0.5, &mut r).unwrap();
    for k in 0..3 {
        let total = ds.class_indices(k).len();
        let tr = train.class_indices(k).len();
        let te = test.class_indices(k).len();
        assert_eq!(tr + te, total);
        assert!((tr as i64 - te as i64).abs() <= 1, "class {k}: {tr} vs {te}");
    }
}

fn quick_config(method: Method, repeats: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(data_file("iris.csv"), LabelColumn::Index(4), method);
    cfg.repeats = repeats;
    cfg.seed = 12345;
    cfg
}

/// The same master seed yields byte-identical JSON no matter the thread
/// count (the wall-time field is execution-dependent and normalized away).
#[test]
fn cross_validate_is_deterministic_under_parallelism() {
    let cfg = quick_config(Method::RgmlGaussian, 8);

    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| cross_validate(&cfg).unwrap().0);
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap()
        .install(|| cross_validate(&cfg).unwrap().0);

    let normalize = |mut r: ResultRecord| {
        r.wall_time_s = 0.0;
        serde_json::to_string_pretty(&r).unwrap()
    };
    assert_eq!(normalize(single), normalize(parallel));
}

#[test]
fn repeat_runs_are_exactly_reproducible() {
    let cfg = quick_config(Method::Gmml { t: 0.5 }, 1);
    let a = cross_validate(&cfg).unwrap().0;
    let b = cross_validate(&cfg).unwrap().0;
    assert_eq!(a.per_repeat_errors, b.per_repeat_errors);
    assert_eq!(a.mean_error_pct, b.mean_error_pct);
}

#[test]
fn result_record_round_trips_through_json() {
    let cfg = quick_config(Method::RgmlTyler, 2);
    let (record, _) = cross_validate(&cfg).unwrap();
    let json = serde_json::to_string_pretty(&record).unwrap();
    let back: ResultRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(serde_json::to_string_pretty(&back).unwrap(), json);
    assert_eq!(back.per_repeat_errors, record.per_repeat_errors);
}

#[test]
fn record_mean_is_exact_average_of_repeats() {
    let cfg = quick_config(Method::Euclidean, 5);
    let (record, _) = cross_validate(&cfg).unwrap();
    let mean = record.per_repeat_errors.iter().sum::<f64>()
        / record.per_repeat_errors.len() as f64;
    assert!((record.mean_error_pct - 100.0 * mean).abs() < 1e-12);
    assert_eq!(record.failed_repeats, 0);
}

#[test]
fn single_repeat_rgml_run_returns_trace() {
    let cfg = quick_config(Method::RgmlTyler, 1);
    let (_, trace) = cross_validate(&cfg).unwrap();
    let trace = trace.expect("single-repeat rgml run should carry a trace");
    assert!(trace.records.len() > 1);
    for w in trace.records.windows(2) {
        assert!(w[1].cost <= w[0].cost + 1e-12);
    }
}

#[test]
fn standardize_flag_changes_euclidean_results() {
    let mut base = quick_config(Method::Euclidean, 4);
    base.dataset = data_file("wine.csv");
    base.label_column = LabelColumn::Index(0);
    let raw = cross_validate(&base).unwrap().0;
    let mut std_cfg = base.clone();
    std_cfg.standardize = true;
    let standardized = cross_validate(&std_cfg).unwrap().0;
    // Wine features are on wildly different scales; z-scoring must matter.
    assert_ne!(raw.mean_error_pct, standardized.mean_error_pct);
    assert!(standardized.mean_error_pct < raw.mean_error_pct);
}

/// Both objectives evaluate finite at the default initializer on the bundled
/// datasets.
#[test]
fn default_init_is_feasible_on_bundled_datasets() {
    use rgml::costs::{build_pairs, rgml_cost, CostKind, RgmlParams};
    use rgml::optimizer::default_init;

    for (file, label) in [
        ("wine.csv", LabelColumn::Index(0)),
        ("iris.csv", LabelColumn::Name("species".into())),
    ] {
        let ds = load_dataset(&data_file(file), &label).unwrap();
        let k = ds.n_classes();
        let n_pairs = 75 * k * (k - 1);
        let pairs = build_pairs(&ds, n_pairs, n_pairs, 3).unwrap();
        for cost_kind in [CostKind::Gaussian, CostKind::Tyler] {
            let params = RgmlParams::new(0.05, cost_kind).unwrap();
            let theta0 = default_init(&pairs, cost_kind.manifold()).unwrap();
            let h = rgml_cost(&theta0, &pairs, &params).unwrap();
            assert!(h.is_finite(), "{file} {cost_kind:?}: initial cost {h}");
        }
    }
}

#[test]
fn config_validation_rejects_bad_fields() {
    let mut cfg = quick_config(Method::Euclidean, 0);
    assert!(cfg.validate().is_err());
    cfg.repeats = 1;
    cfg.train_fraction = 1.0;
    assert!(cfg.validate().is_err());
    cfg.train_fraction = 0.5;
    cfg.mislabel_rate = 1.0;
    assert!(cfg.validate().is_err());
    cfg.mislabel_rate = 0.0;
    cfg.method = Method::Gmml { t: 1.2 };
    assert!(cfg.validate().is_err());
}
