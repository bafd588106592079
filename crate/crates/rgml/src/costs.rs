//! Pair-difference construction and the joint objective: per-class Gaussian or
//! Tyler covariance losses plus a squared-Riemannian-distance pull of every
//! class matrix towards the shared center, with closed-form Euclidean
//! gradients.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::manifold::{riemannian_distance, ManifoldKind, ProductPoint};
use crate::spd::{SpdMatrix, SymMatrix};

/// Pair differences below this norm are treated as duplicate points.
pub const MIN_PAIR_NORM: f64 = 1e-12;

const MAX_REDRAWS: usize = 100;

/// Which per-class loss drives the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    Gaussian,
    Tyler,
}

impl CostKind {
    /// The manifold each cost is optimized over: the Tyler loss is scale
    /// invariant, so its matrices are pinned to unit determinant.
    pub fn manifold(self) -> ManifoldKind {
        match self {
            CostKind::Gaussian => ManifoldKind::Spd,
            CostKind::Tyler => ManifoldKind::UnitDetSpd,
        }
    }
}

/// Objective parameters: regularization weight and loss family.
#[derive(Debug, Clone, Copy)]
pub struct RgmlParams {
    pub lambda: f64,
    pub cost: CostKind,
}

impl RgmlParams {
    pub fn new(lambda: f64, cost: CostKind) -> Result<Self> {
        // NaN fails this comparison too.
        if lambda.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidInput(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self { lambda, cost })
    }
}

/// Sampled pair differences: per-class within-class differences, cross-class
/// differences, and the realized class weights `pi_k = n_k / n_S`.
#[derive(Debug, Clone)]
pub struct PairDifferences {
    per_class: Vec<Vec<DVector<f64>>>,
    cross_class: Vec<DVector<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

impl PairDifferences {
    pub fn new(per_class: Vec<Vec<DVector<f64>>>, cross_class: Vec<DVector<f64>>) -> Result<Self> {
        let dim = per_class
            .first()
            .and_then(|c| c.first())
            .map(|v| v.len())
            .ok_or_else(|| Error::InvalidInput("no similar pairs".into()))?;
        for class in &per_class {
            if class.is_empty() {
                return Err(Error::InvalidInput("a class has no pairs".into()));
            }
            for v in class {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    });
                }
                if v.norm() < MIN_PAIR_NORM {
                    return Err(Error::InvalidInput("zero pair difference".into()));
                }
            }
        }
        for v in &cross_class {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.norm() < MIN_PAIR_NORM {
                return Err(Error::InvalidInput("zero pair difference".into()));
            }
        }
        let n_total: usize = per_class.iter().map(|c| c.len()).sum();
        let weights = per_class
            .iter()
            .map(|c| c.len() as f64 / n_total as f64)
            .collect();
        Ok(Self {
            per_class,
            cross_class,
            weights,
            dim,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_similar(&self) -> usize {
        self.per_class.iter().map(|c| c.len()).sum()
    }

    pub fn n_cross(&self) -> usize {
        self.cross_class.len()
    }

    pub fn class_vectors(&self, k: usize) -> &[DVector<f64>] {
        &self.per_class[k]
    }

    pub fn cross_vectors(&self) -> &[DVector<f64>] {
        &self.cross_class
    }

    /// Realized weights `pi_k = n_k / n_S`; they sum to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Second-moment matrices of the pair differences.
    pub fn scatter(&self) -> ClassScatter {
        let p = self.dim;
        let per_class: Vec<SymMatrix> = self
            .per_class
            .iter()
            .map(|vs| second_moment(p, vs))
            .collect();
        let mut pooled = DMatrix::zeros(p, p);
        for (w, s) in self.weights.iter().zip(per_class.iter()) {
            pooled += s.matrix() * *w;
        }
        let pooled_similar = SymMatrix::symmetrize(&pooled);
        let pooled_cross = second_moment(p, &self.cross_class);
        ClassScatter {
            per_class,
            pooled_similar,
            pooled_cross,
            weights: self.weights.clone(),
        }
    }
}

fn second_moment(p: usize, vs: &[DVector<f64>]) -> SymMatrix {
    let mut m = DMatrix::zeros(p, p);
    for v in vs {
        m.ger(1.0, v, v, 1.0);
    }
    if !vs.is_empty() {
        m /= vs.len() as f64;
    }
    SymMatrix::symmetrize(&m)
}

/// Scatter matrices `S_k = 1/n_k sum s s^T`, their pooled mixture
/// `S = sum pi_k S_k`, and the cross-class scatter `D`.
#[derive(Debug, Clone)]
pub struct ClassScatter {
    per_class: Vec<SymMatrix>,
    pooled_similar: SymMatrix,
    pooled_cross: SymMatrix,
    weights: Vec<f64>,
}

impl ClassScatter {
    pub fn class(&self, k: usize) -> &SymMatrix {
        &self.per_class[k]
    }

    pub fn pooled_similar(&self) -> &SymMatrix {
        &self.pooled_similar
    }

    pub fn pooled_cross(&self) -> &SymMatrix {
        &self.pooled_cross
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Samples pair differences from a labeled dataset.
///
/// Similar pairs are allocated evenly across classes (remainder to the lowest
/// class indices), each drawn uniformly over distinct within-class index
/// pairs, with replacement across draws. Dissimilar pairs are uniform over
/// cross-class index pairs. Duplicate points (zero difference) are redrawn and
/// dropped after 100 failed redraws. Deterministic for a fixed seed.
pub fn build_pairs(
    dataset: &LabeledDataset,
    n_similar: usize,
    n_cross: usize,
    seed: u64,
) -> Result<PairDifferences> {
    let k = dataset.n_classes();
    if n_similar < k || n_cross < k {
        return Err(Error::InvalidInput(format!(
            "need at least one pair per class: n_s={n_similar}, n_d={n_cross}, K={k}"
        )));
    }
    let class_indices: Vec<Vec<usize>> = (0..k).map(|c| dataset.class_indices(c)).collect();
    for (c, idx) in class_indices.iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class {c} has {} samples, need at least 2 to form pairs",
                idx.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = n_similar / k;
    let remainder = n_similar % k;

    let mut per_class = Vec::with_capacity(k);
    for (c, idx) in class_indices.iter().enumerate() {
        let quota = base + usize::from(c < remainder);
        let mut vectors = Vec::with_capacity(quota);
        for _ in 0..quota {
            if let Some(v) = draw_within(dataset, idx, &mut rng) {
                vectors.push(v);
            }
        }
        per_class.push(vectors);
    }

    let m = dataset.len();
    let mut cross = Vec::with_capacity(n_cross);
    for _ in 0..n_cross {
        if let Some(v) = draw_cross(dataset, m, &mut rng) {
            cross.push(v);
        }
    }

    PairDifferences::new(per_class, cross)
}

fn draw_within<R: Rng>(
    dataset: &LabeledDataset,
    idx: &[usize],
    rng: &mut R,
) -> Option<DVector<f64>> {
    for _ in 0..=MAX_REDRAWS {
        let a = rng.random_range(0..idx.len());
        let mut b = rng.random_range(0..idx.len() - 1);
        if b >= a {
            b += 1;
        }
        let v = dataset.feature_row(idx[a]) - dataset.feature_row(idx[b]);
        if v.norm() >= MIN_PAIR_NORM {
            return Some(v);
        }
    }
    None
}

fn draw_cross<R: Rng>(dataset: &LabeledDataset, m: usize, rng: &mut R) -> Option<DVector<f64>> {
    let mut redraws = 0;
    loop {
        let a = rng.random_range(0..m);
        let b = rng.random_range(0..m);
        if dataset.label(a) == dataset.label(b) {
            continue; // uniform over the set of cross-class pairs
        }
        let v = dataset.feature_row(a) - dataset.feature_row(b);
        if v.norm() >= MIN_PAIR_NORM {
            return Some(v);
        }
        redraws += 1;
        if redraws > MAX_REDRAWS {
            return None;
        }
    }
}

/// Gaussian negative log-likelihood of centered data:
/// `1/n sum s^T A^-1 s + log|A|`.
pub fn gaussian_loss(a: &SpdMatrix, vectors: &[DVector<f64>]) -> Result<f64> {
    let f = a.factors()?;
    let n = vectors.len() as f64;
    let mut quad = 0.0;
    for s in vectors {
        quad += quadratic_form(&f.inv, s);
    }
    Ok(quad / n + f.log_det)
}

/// Tyler cost `p/n sum log(s^T A^-1 s) + log|A|`; exactly invariant to the
/// scale of `A`.
pub fn tyler_loss(a: &SpdMatrix, vectors: &[DVector<f64>]) -> Result<f64> {
    let f = a.factors()?;
    let p = a.dim() as f64;
    let n = vectors.len() as f64;
    let mut log_sum = 0.0;
    for s in vectors {
        let q = quadratic_form(&f.inv, s);
        if q <= 0.0 {
            return Err(Error::NumericalFailure(format!(
                "non-positive quadratic form {q:.3e} in Tyler loss"
            )));
        }
        log_sum += q.ln();
    }
    Ok(p / n * log_sum + f.log_det)
}

fn quadratic_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (m * v).dot(v)
}

/// Joint objective `h(theta) = sum_k pi_k [L_k(A_k) + lambda d_R^2(A, A_k)]`.
///
/// The Gaussian cost lives on the plain product manifold, the Tyler cost on
/// the unit-determinant one; a mismatched point is rejected.
pub fn rgml_cost(theta: &ProductPoint, pairs: &PairDifferences, params: &RgmlParams) -> Result<f64> {
    check_domain(theta, pairs, params)?;
    let center = theta.center();
    let mut h = 0.0;
    for (k, &w) in pairs.weights().iter().enumerate() {
        let a_k = theta.class(k);
        let loss = match params.cost {
            CostKind::Gaussian => gaussian_loss(a_k, pairs.class_vectors(k))?,
            CostKind::Tyler => tyler_loss(a_k, pairs.class_vectors(k))?,
        };
        let d = riemannian_distance(center, a_k)?;
        h += w * (loss + params.lambda * d * d);
    }
    Ok(h)
}

/// Closed-form Euclidean gradient tuple `(G, {G_k})` of [`rgml_cost`].
///
/// Per class, with `r(B) = grad_B d^2(A, B)`:
/// Gaussian `G_k = pi_k (A_k^-1 - A_k^-1 S_k A_k^-1 + lambda r(A_k))`;
/// Tyler `G_k = pi_k (A_k^-1 - p/n_k sum_i A_k^-1 s_i s_i^T A_k^-1 /
/// (s_i^T A_k^-1 s_i) + lambda r(A_k))`; center
/// `G = lambda sum_k pi_k grad_A d^2(A, A_k)`. The squared-distance gradient
/// comes from the log map:
/// `grad_B d^2(C, B) = -2 B^-1/2 logm(B^-1/2 C B^-1/2) B^-1/2`.
pub fn rgml_egrad(
    theta: &ProductPoint,
    pairs: &PairDifferences,
    params: &RgmlParams,
) -> Result<Vec<DMatrix<f64>>> {
    check_domain(theta, pairs, params)?;
    let p = theta.dim();
    let center_factors = theta.center().factors()?;

    let mut center_grad = DMatrix::zeros(p, p);
    let mut class_grads = Vec::with_capacity(pairs.n_classes());

    for (k, &w) in pairs.weights().iter().enumerate() {
        let a_k = theta.class(k);
        let f_k = a_k.factors()?;
        let vectors = pairs.class_vectors(k);

        let loss_grad = match params.cost {
            CostKind::Gaussian => {
                let s_k = second_moment(p, vectors);
                &f_k.inv - &f_k.inv * s_k.matrix() * &f_k.inv
            }
            CostKind::Tyler => {
                let n_k = vectors.len() as f64;
                let mut weighted = DMatrix::zeros(p, p);
                for s in vectors {
                    let q = quadratic_form(&f_k.inv, s);
                    if q <= 0.0 {
                        return Err(Error::NumericalFailure(format!(
                            "non-positive quadratic form {q:.3e} in Tyler gradient"
                        )));
                    }
                    weighted.ger(1.0 / q, s, s, 1.0);
                }
                let weighted = SymMatrix::symmetrize(&weighted);
                let dim = p as f64;
                &f_k.inv - (&f_k.inv * weighted.matrix() * &f_k.inv) * (dim / n_k)
            }
        };

        // grad_B d^2(C, B) at B = A_k with C = A (and vice versa for the
        // center part).
        let reg_grad_class = dsq_grad(&f_k.inv_sqrt, theta.center().matrix())?;
        let reg_grad_center = dsq_grad(&center_factors.inv_sqrt, a_k.matrix())?;

        class_grads.push((loss_grad + reg_grad_class * params.lambda) * w);
        center_grad += reg_grad_center * (params.lambda * w);
    }

    let mut out = Vec::with_capacity(1 + class_grads.len());
    out.push(center_grad);
    out.extend(class_grads);
    Ok(out)
}

/// `-2 B^-1/2 logm(B^-1/2 C B^-1/2) B^-1/2` given `B^-1/2` and `C`.
fn dsq_grad(b_inv_sqrt: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inner = SymMatrix::symmetrize(&(b_inv_sqrt * c * b_inv_sqrt));
    let log = crate::spd::positive_eig_map(&inner, f64::ln)?;
    Ok(-2.0 * (b_inv_sqrt * log * b_inv_sqrt))
}

fn check_domain(
    theta: &ProductPoint,
    pairs: &PairDifferences,
    params: &RgmlParams,
) -> Result<()> {
    if theta.kind() != params.cost.manifold() {
        return Err(Error::InvalidInput(
            "cost and manifold kind do not match".into(),
        ));
    }
    if theta.n_classes() != pairs.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: pairs.n_classes(),
            got: theta.n_classes(),
        });
    }
    if theta.dim() != pairs.dim() {
        return Err(Error::DimensionMismatch {
            expected: pairs.dim(),
            got: theta.dim(),
        });
    }
    Ok(())
}
