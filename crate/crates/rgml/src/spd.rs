//! Dense symmetric-matrix kernel: eigendecomposition and eigenvalue-mapped
//! matrix functions (log, exp, powers, inverse square roots).
//!
//! Every geometric operation in this crate reduces to `sym_eig` plus a scalar
//! map of the eigenvalues. Matrices are dense, double precision, and intended
//! for small dimensions (the benchmark datasets have p <= 18).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which a matrix is not accepted as SPD.
pub const SPD_REL_TOL: f64 = 1e-12;

const EIG_MAX_ITERS: usize = 10_000;

/// A real symmetric matrix. Symmetry is enforced on construction by
/// `(M + M^T) / 2`, so `entries[i][j] == entries[j][i]` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Symmetrizes a square matrix: `(M + M^T) / 2`.
    ///
    /// Panics if the matrix is not square.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrize requires a square matrix");
        let mut s = DMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..=i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Self { m: s }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Eigendecomposition with ascending eigenvalues and orthonormal
    /// eigenvectors. Deterministic for a fixed input: ties keep the order
    /// produced by the underlying QL sweep (stable sort).
    pub fn eig(&self) -> Result<EigenPair> {
        sym_eig(self)
    }

    /// Matrix exponential. Defined for any symmetric matrix; the result is
    /// always SPD.
    pub fn expm(&self) -> Result<SpdMatrix> {
        let e = self.eig()?;
        SpdMatrix::from_eigen_mapped(&e, f64::exp)
    }
}

/// A symmetric positive definite matrix. Construction verifies
/// `lambda_min > SPD_REL_TOL * lambda_max`; violations are an error, never a
/// silent clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
}

impl SpdMatrix {
    /// Builds an SPD matrix from arbitrary square data. The input is
    /// symmetrized first, then the eigenvalue check is applied.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::from_sym(SymMatrix::symmetrize(&m))
    }

    pub fn from_sym(s: SymMatrix) -> Result<Self> {
        let e = s.eig()?;
        check_positive(&e)?;
        Ok(Self { m: s.m })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// Reconstructs `V diag(f(lambda)) V^T` from an eigendecomposition,
    /// requiring the mapped eigenvalues to pass the SPD check.
    pub fn from_eigen_mapped(e: &EigenPair, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mapped: Vec<f64> = e.values.iter().map(|&l| f(l)).collect();
        let lo = mapped.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = mapped.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(lo > SPD_REL_TOL * hi && hi > 0.0) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NotPositiveDefinite { eigenvalue: lo });
        }
        let m = e.recompose_with(f);
        Ok(Self {
            m: SymMatrix::symmetrize(&m).m,
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn as_sym(&self) -> SymMatrix {
        SymMatrix { m: self.m.clone() }
    }

    pub fn eig(&self) -> Result<EigenPair> {
        sym_eig(&SymMatrix { m: self.m.clone() })
    }

    pub fn logm(&self) -> Result<SymMatrix> {
        let e = self.eig()?;
        check_positive(&e)?;
        Ok(SymMatrix::symmetrize(&e.recompose_with(f64::ln)))
    }

    pub fn sqrtm(&self) -> Result<SpdMatrix> {
        let e = self.eig()?;
        check_positive(&e)?;
        Self::from_eigen_mapped(&e, f64::sqrt)
    }

    pub fn inv_sqrtm(&self) -> Result<SpdMatrix> {
        let e = self.eig()?;
        check_positive(&e)?;
        Self::from_eigen_mapped(&e, |l| 1.0 / l.sqrt())
    }

    /// Matrix power `A^t` through the spectral map `lambda -> lambda^t`.
    pub fn powm(&self, t: f64) -> Result<SpdMatrix> {
        let e = self.eig()?;
        check_positive(&e)?;
        Self::from_eigen_mapped(&e, |l| l.powf(t))
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        let e = self.eig()?;
        check_positive(&e)?;
        Self::from_eigen_mapped(&e, |l| 1.0 / l)
    }

    pub fn log_det(&self) -> Result<f64> {
        let e = self.eig()?;
        check_positive(&e)?;
        Ok(e.values.iter().map(|l| l.ln()).sum())
    }

    /// One eigendecomposition, all the derived factors the hot paths need.
    pub fn factors(&self) -> Result<SpdFactors> {
        let e = self.eig()?;
        check_positive(&e)?;
        Ok(SpdFactors {
            inv: SymMatrix::symmetrize(&e.recompose_with(|l| 1.0 / l)).m,
            sqrt: SymMatrix::symmetrize(&e.recompose_with(f64::sqrt)).m,
            inv_sqrt: SymMatrix::symmetrize(&e.recompose_with(|l| 1.0 / l.sqrt())).m,
            log_det: e.values.iter().map(|l| l.ln()).sum(),
        })
    }
}

/// Derived quantities of an SPD matrix computed from a single
/// eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpdFactors {
    pub inv: DMatrix<f64>,
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub log_det: f64,
}

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPair {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let p = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..p {
            let fl = f(self.values[j]);
            for i in 0..p {
                scaled[(i, j)] *= fl;
            }
        }
        scaled * self.vectors.transpose()
    }

    pub fn recompose(&self) -> DMatrix<f64> {
        self.recompose_with(|l| l)
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted ascending.
pub fn sym_eig(m: &SymMatrix) -> Result<EigenPair> {
    if m.m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "matrix entries must be finite".into(),
        ));
    }
    let se = nalgebra::SymmetricEigen::try_new(m.m.clone(), f64::EPSILON, EIG_MAX_ITERS)
        .ok_or(Error::EigenFailed)?;

    let p = m.dim();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());

    let values = DVector::from_iterator(p, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(EigenPair { values, vectors })
}

/// Scalar functions applicable to a symmetric matrix through its spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFn {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
    Pow(f64),
    Inv,
}

impl MatrixFn {
    fn requires_positive(self) -> bool {
        !matches!(self, MatrixFn::Exp)
    }

    fn apply(self, l: f64) -> f64 {
        match self {
            MatrixFn::Log => l.ln(),
            MatrixFn::Exp => l.exp(),
            MatrixFn::Sqrt => l.sqrt(),
            MatrixFn::InvSqrt => 1.0 / l.sqrt(),
            MatrixFn::Pow(t) => l.powf(t),
            MatrixFn::Inv => 1.0 / l,
        }
    }
}

/// Applies `V diag(f(lambda)) V^T`. Positivity-requiring tags (everything but
/// `Exp`) verify the spectrum first and report the offending eigenvalue.
pub fn spd_map(m: &SymMatrix, f: MatrixFn) -> Result<SymMatrix> {
    let e = m.eig()?;
    if f.requires_positive() {
        check_positive(&e)?;
    }
    Ok(SymMatrix::symmetrize(&e.recompose_with(|l| f.apply(l))))
}

fn check_positive(e: &EigenPair) -> Result<()> {
    let lo = e.values[0];
    let hi = e.values[e.dim() - 1];
    if lo > SPD_REL_TOL * hi && hi > 0.0 {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite { eigenvalue: lo })
    }
}

/// `V f(lambda) V^T` requiring a strictly positive spectrum in absolute
/// terms. Congruence intermediates such as `A^-1/2 B A^-1/2` between
/// far-apart SPD matrices are legitimately ill-conditioned beyond the
/// representability bound of [`SpdMatrix`], while their logs and powers stay
/// well-defined; this entry point serves those.
pub(crate) fn positive_eig_map(m: &SymMatrix, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let e = m.eig()?;
    if e.values[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: e.values[0],
        });
    }
    Ok(e.recompose_with(f))
}

/// Eigenvalues only, with the same strict absolute positivity requirement.
pub(crate) fn positive_eigenvalues(m: &SymMatrix) -> Result<DVector<f64>> {
    let e = m.eig()?;
    if e.values[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: e.values[0],
        });
    }
    Ok(e.values)
}
