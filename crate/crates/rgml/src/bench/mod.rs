//! End-to-end benchmark harness: mislabeled-training k-NN evaluation of the
//! learned metrics under repeated stratified cross-validation.

pub mod cli;
pub mod dataset;

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::costs::{build_pairs, rgml_cost, rgml_egrad, CostKind, RgmlParams};
use crate::error::{Error, Result};
use crate::optimizer::{default_init, minimize, SolverOptions, SolverTrace};
use crate::spd::SpdMatrix;
use dataset::{inject_mislabels, LabelColumn, LabeledDataset};

/// Metric-fitting method of a benchmark run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Identity matrix; plain Euclidean k-NN.
    Euclidean,
    /// Second-moment matrix of the raw training features.
    Scm,
    /// Closed-form geodesic interpolation between the pair scatters.
    Gmml { t: f64 },
    RgmlGaussian,
    RgmlTyler,
}

impl Method {
    pub fn is_rgml(self) -> bool {
        matches!(self, Method::RgmlGaussian | Method::RgmlTyler)
    }
}

/// Full description of a benchmark run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub label_column: LabelColumn,
    pub method: Method,
    pub lambda: f64,
    pub mislabel_rate: f64,
    pub repeats: usize,
    pub train_fraction: f64,
    pub k_neighbors: usize,
    /// Pair budget: `n_S = n_D = pairs_factor * K * (K - 1)`.
    pub pairs_factor: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>, label_column: LabelColumn, method: Method) -> Self {
        Self {
            dataset: dataset.into(),
            label_column,
            method,
            lambda: 0.05,
            mislabel_rate: 0.0,
            repeats: 200,
            train_fraction: 0.5,
            k_neighbors: 5,
            pairs_factor: 75,
            seed: 0,
            standardize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::InvalidInput("repeats must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidInput(
                "train fraction must be strictly between 0 and 1".into(),
            ));
        }
        if self.k_neighbors < 1 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.mislabel_rate) {
            return Err(Error::InvalidInput("mislabel rate must be in [0, 1)".into()));
        }
        if self.lambda.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidInput("lambda must be positive".into()));
        }
        if self.pairs_factor < 1 {
            return Err(Error::InvalidInput("pairs factor must be at least 1".into()));
        }
        if let Method::Gmml { t } = self.method {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidInput(format!(
                    "gmml parameter t must be in [0, 1], got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Aggregated benchmark outcome. `per_repeat_errors` holds misclassification
/// fractions in repeat order (failed repeats excluded and counted);
/// `mean_error_pct` is exactly their arithmetic mean times 100.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub per_repeat_errors: Vec<f64>,
    pub mean_error_pct: f64,
    pub std_error_pct: f64,
    pub failed_repeats: usize,
    pub wall_time_s: f64,
}

/// Stratified split into train/test: per class, `round(fraction * m_c)`
/// shuffled samples go to the training side, so class proportions are
/// preserved within one sample.
pub fn stratified_split<R: Rng>(
    data: &LabeledDataset,
    train_fraction: f64,
    rng: &mut R,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for k in 0..data.n_classes() {
        let mut idx = data.class_indices(k);
        shuffle(&mut idx, rng);
        let n_train = (train_fraction * idx.len() as f64).round() as usize;
        let n_train = n_train.clamp(1, idx.len() - 1);
        train_rows.extend_from_slice(&idx[..n_train]);
        test_rows.extend_from_slice(&idx[n_train..]);
    }
    Ok((
        data.subset(&train_rows, format!("{}-train", data.name()))?,
        data.subset(&test_rows, format!("{}-test", data.name()))?,
    ))
}

fn shuffle<R: Rng>(idx: &mut [usize], rng: &mut R) {
    use rand::seq::SliceRandom;
    idx.shuffle(rng);
}

/// Misclassification rate of Mahalanobis k-NN: both sets are whitened by
/// `A^-1/2` and classified by majority vote in the whitened Euclidean space.
/// Vote ties break by smaller mean neighbor distance, then lower label.
pub fn evaluate(
    a: &SpdMatrix,
    train: &LabeledDataset,
    test: &LabeledDataset,
    k_neighbors: usize,
) -> Result<f64> {
    if k_neighbors > train.len() {
        return Err(Error::InvalidInput(format!(
            "k = {k_neighbors} exceeds the training size {}",
            train.len()
        )));
    }
    if a.dim() != train.dim() || train.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: train.dim(),
        });
    }
    let whitener = a.inv_sqrtm()?;
    let train_z = train.features() * whitener.matrix();
    let test_z = test.features() * whitener.matrix();
    let n_classes = train.n_classes().max(test.n_classes());

    let mut errors = 0usize;
    for i in 0..test.len() {
        let predicted = knn_predict(
            &train_z,
            train.labels(),
            n_classes,
            &test_z.row(i).transpose(),
            k_neighbors,
        );
        if predicted != test.label(i) {
            errors += 1;
        }
    }
    Ok(errors as f64 / test.len() as f64)
}

fn knn_predict(
    train_z: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    query: &DVector<f64>,
    k: usize,
) -> usize {
    let mut dists: Vec<(f64, usize)> = (0..train_z.nrows())
        .map(|r| {
            let mut d2 = 0.0;
            for j in 0..train_z.ncols() {
                let diff = train_z[(r, j)] - query[j];
                d2 += diff * diff;
            }
            (d2.sqrt(), r)
        })
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut votes = vec![0usize; n_classes];
    let mut dist_sums = vec![0.0f64; n_classes];
    for &(d, r) in dists.iter().take(k) {
        votes[labels[r]] += 1;
        dist_sums[labels[r]] += d;
    }

    let mut best = usize::MAX;
    for label in 0..n_classes {
        if votes[label] == 0 {
            continue;
        }
        if best == usize::MAX {
            best = label;
            continue;
        }
        let better = votes[label] > votes[best] || {
            votes[label] == votes[best] && {
                let mean_new = dist_sums[label] / votes[label] as f64;
                let mean_best = dist_sums[best] / votes[best] as f64;
                mean_new < mean_best
            }
        };
        if better {
            best = label;
        }
    }
    best
}

/// Fits the configured metric on a training set. The solver trace is returned
/// for the gradient-descent methods.
pub fn fit_metric(
    method: Method,
    lambda: f64,
    pairs_factor: usize,
    train: &LabeledDataset,
    pair_seed: u64,
) -> Result<(SpdMatrix, Option<SolverTrace>)> {
    match method {
        Method::Euclidean => Ok((SpdMatrix::identity(train.dim()), None)),
        Method::Scm => {
            let rows: Vec<DVector<f64>> = (0..train.len()).map(|i| train.feature_row(i)).collect();
            Ok((baselines::scm(&rows)?, None))
        }
        Method::Gmml { t } => {
            let k = train.n_classes();
            let n_pairs = pairs_factor * k * (k - 1);
            let pairs = build_pairs(train, n_pairs, n_pairs, pair_seed)?;
            let scatter = pairs.scatter();
            let s = baselines::ridge_to_spd(scatter.pooled_similar())?;
            let d = baselines::ridge_to_spd(scatter.pooled_cross())?;
            Ok((baselines::gmml(&s, &d, t)?, None))
        }
        Method::RgmlGaussian | Method::RgmlTyler => {
            let cost_kind = if method == Method::RgmlGaussian {
                CostKind::Gaussian
            } else {
                CostKind::Tyler
            };
            let k = train.n_classes();
            let n_pairs = pairs_factor * k * (k - 1);
            let pairs = build_pairs(train, n_pairs, n_pairs, pair_seed)?;
            let params = RgmlParams::new(lambda, cost_kind)?;
            let theta0 = default_init(&pairs, cost_kind.manifold())?;
            let opts = SolverOptions::default();
            let (theta, trace) = minimize(
                |t| rgml_cost(t, &pairs, &params),
                |t| rgml_egrad(t, &pairs, &params),
                theta0,
                &opts,
            )?;
            if !trace.final_cost().is_finite() {
                return Err(Error::NumericalFailure(
                    "optimizer finished with non-finite cost".into(),
                ));
            }
            Ok((theta.center().clone(), Some(trace)))
        }
    }
}

/// Runs the full protocol: per repeat, a seed-derived stratified split, label
/// corruption of the training half, metric fitting on the corrupted training
/// data, and k-NN evaluation on the untouched test half.
///
/// Repeats run in parallel; the per-repeat generator is seeded with
/// `seed ^ repeat_index`, so results are identical to sequential execution.
/// A failed repeat is excluded from the aggregates and counted. For
/// single-repeat gradient-descent runs the solver trace is also returned.
pub fn cross_validate(config: &ExperimentConfig) -> Result<(ResultRecord, Option<SolverTrace>)> {
    config.validate()?;
    let started = Instant::now();
    let data = dataset::load_dataset(&config.dataset, &config.label_column)?;

    let outcomes: Vec<Result<(f64, Option<SolverTrace>)>> = (0..config.repeats)
        .into_par_iter()
        .map(|repeat| run_repeat(config, &data, repeat as u64))
        .collect();

    let mut per_repeat_errors = Vec::with_capacity(config.repeats);
    let mut failed = 0usize;
    let mut trace = None;
    for outcome in outcomes {
        match outcome {
            Ok((err, t)) => {
                per_repeat_errors.push(err);
                if config.repeats == 1 {
                    trace = t;
                }
            }
            Err(_) => failed += 1,
        }
    }
    if per_repeat_errors.is_empty() {
        return Err(Error::NumericalFailure(
            "every cross-validation repeat failed".into(),
        ));
    }

    let n = per_repeat_errors.len() as f64;
    let mean = per_repeat_errors.iter().sum::<f64>() / n;
    let variance = per_repeat_errors
        .iter()
        .map(|e| (e - mean) * (e - mean))
        .sum::<f64>()
        / n;

    let record = ResultRecord {
        config: config.clone(),
        per_repeat_errors,
        mean_error_pct: 100.0 * mean,
        std_error_pct: 100.0 * variance.sqrt(),
        failed_repeats: failed,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok((record, trace))
}

fn run_repeat(
    config: &ExperimentConfig,
    data: &LabeledDataset,
    repeat: u64,
) -> Result<(f64, Option<SolverTrace>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ repeat);
    let (train, test) = stratified_split(data, config.train_fraction, &mut rng)?;
    let train = inject_mislabels(&train, config.mislabel_rate, &mut rng);

    let (train, test) = if config.standardize {
        let (shift, scale) = standardization_stats(&train);
        (
            train.standardized(&shift, &scale),
            test.standardized(&shift, &scale),
        )
    } else {
        (train, test)
    };

    let pair_seed = rng.next_u64();
    let (metric, trace) = fit_metric(
        config.method,
        config.lambda,
        config.pairs_factor,
        &train,
        pair_seed,
    )?;
    let err = evaluate(&metric, &train, &test, config.k_neighbors)?;
    Ok((err, trace))
}

fn standardization_stats(train: &LabeledDataset) -> (DVector<f64>, DVector<f64>) {
    let m = train.len() as f64;
    let p = train.dim();
    let mut mean = DVector::zeros(p);
    for i in 0..train.len() {
        mean += train.feature_row(i);
    }
    mean /= m;
    let mut var = DVector::zeros(p);
    for i in 0..train.len() {
        let centered = train.feature_row(i) - &mean;
        var += centered.component_mul(&centered);
    }
    var /= m;
    let scale = var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    (mean, scale)
}
