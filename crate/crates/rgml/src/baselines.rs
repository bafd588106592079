//! Reference metric constructions (closed-form geodesic solution, sample
//! second moments) and a synthetic-data generator for validating the
//! covariance-estimation reading of pair scatters.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::bench::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::manifold::geodesic;
use crate::spd::{SpdMatrix, SymMatrix, SPD_REL_TOL};

/// Ridge factor applied to rank-deficient scatters: `1e-8 * tr/p * I`.
const RIDGE_FACTOR: f64 = 1e-8;

/// Returns the matrix as SPD, adding the standard ridge once if the spectrum
/// fails the relative positivity check.
pub fn ridge_to_spd(m: &SymMatrix) -> Result<SpdMatrix> {
    let e = m.eig()?;
    let p = m.dim();
    let lo = e.values[0];
    let hi = e.values[p - 1];
    if lo > SPD_REL_TOL * hi && hi > 0.0 {
        return SpdMatrix::from_sym(m.clone());
    }
    let ridge = RIDGE_FACTOR * m.matrix().trace() / p as f64;
    let ridged = m.matrix() + DMatrix::identity(p, p) * ridge;
    SpdMatrix::new(ridged)
}

/// Closed-form metric of the trace objective `Tr(A^-1 S) + Tr(A D)`:
/// `A = (S^-1 #_t D)^-1` with `t = 1/2` the exact minimizer and other
/// `t in [0, 1]` the one-parameter family sliding between `S` and `D^-1`.
pub fn gmml(s: &SpdMatrix, d: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!(
            "geodesic parameter must be in [0, 1], got {t}"
        )));
    }
    let s_inv = s.inverse()?;
    geodesic(&s_inv, d, t)?.inverse()
}

/// Sample second moment `(1/n) sum v v^T`, ridge-regularized to SPD when
/// rank-deficient.
pub fn scm(vectors: &[DVector<f64>]) -> Result<SpdMatrix> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidInput("scm of an empty set".into()))?;
    let p = first.len();
    let mut m = DMatrix::zeros(p, p);
    for v in vectors {
        if v.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: v.len(),
            });
        }
        m.ger(1.0, v, v, 1.0);
    }
    m /= vectors.len() as f64;
    ridge_to_spd(&SymMatrix::symmetrize(&m))
}

/// Noise family of the synthetic generator. Student-t draws are rescaled so
/// the innovations have identity covariance (requires dof > 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    Gaussian,
    StudentT { dof: f64 },
}

/// Class-conditional generator: `x = mu_k + Sigma_k^1/2 u` with iid
/// unit-covariance innovations `u`.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    means: Vec<DVector<f64>>,
    covariances: Vec<SpdMatrix>,
    samples_per_class: usize,
    noise: NoiseFamily,
}

impl SyntheticSpec {
    pub fn new(
        means: Vec<DVector<f64>>,
        covariances: Vec<SpdMatrix>,
        samples_per_class: usize,
        noise: NoiseFamily,
    ) -> Result<Self> {
        if means.is_empty() || means.len() != covariances.len() {
            return Err(Error::InvalidInput(
                "need one mean and one covariance per class".into(),
            ));
        }
        let p = means[0].len();
        if means.iter().any(|m| m.len() != p) || covariances.iter().any(|c| c.dim() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: 0 });
        }
        if samples_per_class < 2 {
            return Err(Error::InvalidInput(
                "need at least two samples per class".into(),
            ));
        }
        if let NoiseFamily::StudentT { dof } = noise {
            if dof.partial_cmp(&2.0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::InvalidInput(format!(
                    "student-t dof must exceed 2, got {dof}"
                )));
            }
        }
        Ok(Self {
            means,
            covariances,
            samples_per_class,
            noise,
        })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }
}

/// Draws the dataset specified by `spec`, deterministically for a fixed seed.
pub fn synth_generate(spec: &SyntheticSpec, seed: u64) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = spec.dim();
    let n = spec.n_classes() * spec.samples_per_class;
    let mut features = DMatrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);

    let mut row = 0;
    for (k, (mean, cov)) in spec.means.iter().zip(spec.covariances.iter()).enumerate() {
        let sqrt_cov = cov.sqrtm()?;
        for _ in 0..spec.samples_per_class {
            let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            let u = match spec.noise {
                NoiseFamily::Gaussian => z,
                NoiseFamily::StudentT { dof } => {
                    // z * sqrt((dof - 2) / w) with w ~ chi^2(dof) has identity
                    // covariance and heavy tails.
                    let w: f64 = ChiSquared::new(dof).unwrap().sample(&mut rng);
                    z * ((dof - 2.0) / w).sqrt()
                }
            };
            let x = mean + sqrt_cov.matrix() * u;
            features.set_row(row, &x.transpose());
            labels.push(k);
            row += 1;
        }
    }
    LabeledDataset::new("synthetic", features, labels)
}
