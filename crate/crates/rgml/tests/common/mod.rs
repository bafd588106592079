//! Shared fixtures: seeded random SPD matrices, product points, and tangents.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rgml::manifold::{ManifoldKind, ProductPoint, ProductTangent};
use rgml::spd::{SpdMatrix, SymMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_matrix<R: Rng>(p: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng))
}

pub fn rand_vector<R: Rng>(p: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(p, |_, _| StandardNormal.sample(rng))
}

pub fn rand_sym<R: Rng>(p: usize, scale: f64, rng: &mut R) -> SymMatrix {
    SymMatrix::symmetrize(&(rand_matrix(p, rng) * scale))
}

/// Well-conditioned random SPD matrix: `expm` of a moderate symmetric matrix.
pub fn rand_spd<R: Rng>(p: usize, rng: &mut R) -> SpdMatrix {
    rand_sym(p, 0.5, rng).expm().unwrap()
}

/// Random invertible (generically) square matrix.
pub fn rand_invertible<R: Rng>(p: usize, rng: &mut R) -> DMatrix<f64> {
    rand_matrix(p, rng) + DMatrix::identity(p, p) * 2.0
}

pub fn unit_det<R: Rng>(p: usize, rng: &mut R) -> SpdMatrix {
    let a = rand_spd(p, rng);
    let scale = (-a.log_det().unwrap() / p as f64).exp();
    SpdMatrix::new(a.matrix() * scale).unwrap()
}

pub fn rand_point<R: Rng>(kind: ManifoldKind, p: usize, k: usize, rng: &mut R) -> ProductPoint {
    let gen = |rng: &mut R| match kind {
        ManifoldKind::Spd => rand_spd(p, rng),
        ManifoldKind::UnitDetSpd => unit_det(p, rng),
    };
    let center = gen(rng);
    let classes = (0..k).map(|_| gen(rng)).collect();
    ProductPoint::new(kind, center, classes).unwrap()
}

pub fn rand_tangent<R: Rng>(theta: &ProductPoint, scale: f64, rng: &mut R) -> ProductTangent {
    let ambient: Vec<DMatrix<f64>> = (0..=theta.n_classes())
        .map(|_| rand_matrix(theta.dim(), rng) * scale)
        .collect();
    theta.project_tangent(&ambient).unwrap()
}
