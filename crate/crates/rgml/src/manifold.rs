//! Riemannian geometry of the product manifold `(S_p^+)^{K+1}` and of its
//! unit-determinant submanifold: affine-invariant metric, tangent projections,
//! exponential map, second-order retraction, geodesics, and the conversion of
//! Euclidean gradients to Riemannian ones.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spd::{SpdMatrix, SymMatrix};

/// Tolerance on `|det - 1|` for points of the unit-determinant submanifold.
pub const UNIT_DET_TOL: f64 = 1e-9;

/// Which manifold a product point lives on.
///
/// `Spd` is the open cone product; `UnitDetSpd` additionally constrains every
/// component to determinant one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Spd,
    UnitDetSpd,
}

/// A point `(A, A_1, ..., A_K)` of the product manifold. `classes` may be
/// empty, which gives plain single-matrix optimization over `S_p^+`.
#[derive(Debug, Clone)]
pub struct ProductPoint {
    kind: ManifoldKind,
    center: SpdMatrix,
    classes: Vec<SpdMatrix>,
}

impl ProductPoint {
    pub fn new(kind: ManifoldKind, center: SpdMatrix, classes: Vec<SpdMatrix>) -> Result<Self> {
        let p = center.dim();
        for c in &classes {
            if c.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: c.dim(),
                });
            }
        }
        let point = Self {
            kind,
            center,
            classes,
        };
        if kind == ManifoldKind::UnitDetSpd {
            for m in point.components() {
                let det = m.log_det()?.exp();
                if (det - 1.0).abs() > UNIT_DET_TOL {
                    return Err(Error::InvalidInput(format!(
                        "unit-determinant point has |det| = {det:.12}"
                    )));
                }
            }
        }
        Ok(point)
    }

    /// For components normalized by construction (retraction and exponential
    /// outputs): skips the determinant re-check, whose fresh eigendecomposition
    /// adds noise above the tolerance for ill-conditioned matrices.
    pub(crate) fn new_normalized(
        kind: ManifoldKind,
        center: SpdMatrix,
        classes: Vec<SpdMatrix>,
    ) -> Self {
        Self {
            kind,
            center,
            classes,
        }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn center(&self) -> &SpdMatrix {
        &self.center
    }

    pub fn class(&self, k: usize) -> &SpdMatrix {
        &self.classes[k]
    }

    /// Center first, then the class matrices.
    pub fn components(&self) -> impl Iterator<Item = &SpdMatrix> {
        std::iter::once(&self.center).chain(self.classes.iter())
    }

    /// Affine-invariant inner product
    /// `Tr(A^-1 xi A^-1 eta) + sum_k Tr(A_k^-1 xi_k A_k^-1 eta_k)`.
    pub fn inner(&self, xi: &ProductTangent, eta: &ProductTangent) -> Result<f64> {
        self.check_tangent_dims(xi)?;
        self.check_tangent_dims(eta)?;
        let mut total = 0.0;
        for ((m, x), e) in self.components().zip(xi.components()).zip(eta.components()) {
            let inv = m.inverse()?;
            total += (inv.matrix() * x.matrix() * inv.matrix() * e.matrix()).trace();
        }
        Ok(total)
    }

    pub fn norm(&self, xi: &ProductTangent) -> Result<f64> {
        Ok(self.inner(xi, xi)?.sqrt())
    }

    /// Orthogonal projection of ambient matrices onto the tangent space.
    ///
    /// On the plain product this is componentwise symmetrization; the
    /// unit-determinant submanifold additionally removes the trace component:
    /// `sym(xi) - Tr(A^-1 sym(xi)) / p * A`.
    pub fn project_tangent(&self, ambient: &[DMatrix<f64>]) -> Result<ProductTangent> {
        self.check_component_count(ambient.len())?;
        let p = self.dim() as f64;
        let mut out = Vec::with_capacity(ambient.len());
        for (m, a) in self.components().zip(ambient.iter()) {
            if a.nrows() != self.dim() || a.ncols() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: a.nrows(),
                });
            }
            let sym = SymMatrix::symmetrize(a);
            match self.kind {
                ManifoldKind::Spd => out.push(sym),
                ManifoldKind::UnitDetSpd => {
                    let inv = m.inverse()?;
                    let trace = (inv.matrix() * sym.matrix()).trace();
                    let adjusted = sym.matrix() - (trace / p) * m.matrix();
                    out.push(SymMatrix::symmetrize(&adjusted));
                }
            }
        }
        ProductTangent::from_components(out)
    }

    /// Exponential map, componentwise `A expm(A^-1 xi)` evaluated in the
    /// congruence form `A^1/2 expm(A^-1/2 xi A^-1/2) A^1/2`. The submanifold
    /// shares the geodesics of the full product, so no renormalization is
    /// applied there.
    pub fn exp_map(&self, xi: &ProductTangent) -> Result<ProductPoint> {
        self.check_tangent_dims(xi)?;
        let mut comps = Vec::with_capacity(1 + self.n_classes());
        for (m, x) in self.components().zip(xi.components()) {
            let f = m.factors()?;
            let inner = SymMatrix::symmetrize(&(&f.inv_sqrt * x.matrix() * &f.inv_sqrt));
            let e = inner.expm()?;
            comps.push(SpdMatrix::new(&f.sqrt * e.matrix() * &f.sqrt)?);
        }
        let center = comps.remove(0);
        Ok(ProductPoint::new_normalized(self.kind, center, comps))
    }

    /// Second-order retraction `A + xi + 1/2 xi A^-1 xi`, divided by
    /// `det^(1/p)` on the unit-determinant submanifold.
    ///
    /// A step that leaves the SPD cone is an error (`NotPositiveDefinite`);
    /// the optimizer treats it as a rejected line-search trial.
    pub fn retract(&self, xi: &ProductTangent) -> Result<ProductPoint> {
        self.check_tangent_dims(xi)?;
        let p = self.dim() as f64;
        let mut comps = Vec::with_capacity(1 + self.n_classes());
        for (m, x) in self.components().zip(xi.components()) {
            let inv = m.inverse()?;
            let raw = m.matrix() + x.matrix() + 0.5 * (x.matrix() * inv.matrix() * x.matrix());
            let e = SymMatrix::symmetrize(&raw).eig()?;
            match self.kind {
                ManifoldKind::Spd => comps.push(SpdMatrix::from_eigen_mapped(&e, |l| l)?),
                ManifoldKind::UnitDetSpd => {
                    if e.values[0] <= crate::spd::SPD_REL_TOL * e.values[e.dim() - 1] {
                        return Err(Error::NotPositiveDefinite {
                            eigenvalue: e.values[0],
                        });
                    }
                    let scale = (e.values.iter().map(|l| l.ln()).sum::<f64>() / p).exp();
                    comps.push(SpdMatrix::from_eigen_mapped(&e, |l| l / scale)?);
                }
            }
        }
        let center = comps.remove(0);
        Ok(ProductPoint::new_normalized(self.kind, center, comps))
    }

    /// Converts a Euclidean gradient tuple `(G, {G_k})` into the Riemannian
    /// gradient: `P_theta(A G A, {A_k G_k A_k})` with the projection matching
    /// the manifold kind.
    pub fn egrad_to_rgrad(&self, egrad: &[DMatrix<f64>]) -> Result<ProductTangent> {
        self.check_component_count(egrad.len())?;
        let ambient: Vec<DMatrix<f64>> = self
            .components()
            .zip(egrad.iter())
            .map(|(m, g)| m.matrix() * g * m.matrix())
            .collect();
        self.project_tangent(&ambient)
    }

    /// Componentwise geodesic from `self` to `other`.
    pub fn geodesic_to(&self, other: &ProductPoint, t: f64) -> Result<ProductPoint> {
        if self.kind != other.kind || self.n_classes() != other.n_classes() {
            return Err(Error::InvalidInput(
                "geodesic endpoints live on different manifolds".into(),
            ));
        }
        let center = geodesic(&self.center, &other.center, t)?;
        let classes = self
            .classes
            .iter()
            .zip(other.classes.iter())
            .map(|(a, b)| geodesic(a, b, t))
            .collect::<Result<Vec<_>>>()?;
        // Geodesics of unit-determinant endpoints stay unit-determinant.
        Ok(ProductPoint::new_normalized(self.kind, center, classes))
    }

    fn check_component_count(&self, got: usize) -> Result<()> {
        let expected = 1 + self.n_classes();
        if got != expected {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    fn check_tangent_dims(&self, xi: &ProductTangent) -> Result<()> {
        if xi.n_classes() != self.n_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_classes(),
                got: xi.n_classes(),
            });
        }
        if xi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xi.dim(),
            });
        }
        Ok(())
    }
}

/// A tangent vector `(xi, xi_1, ..., xi_K)`: one symmetric matrix per
/// component of the attached point.
#[derive(Debug, Clone)]
pub struct ProductTangent {
    center: SymMatrix,
    classes: Vec<SymMatrix>,
}

impl ProductTangent {
    pub fn from_components(mut comps: Vec<SymMatrix>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::InvalidInput("tangent needs a center component".into()));
        }
        let center = comps.remove(0);
        let p = center.dim();
        for c in &comps {
            if c.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: c.dim(),
                });
            }
        }
        Ok(Self {
            center,
            classes: comps,
        })
    }

    pub fn zeros_like(point: &ProductPoint) -> Self {
        Self {
            center: SymMatrix::zeros(point.dim()),
            classes: vec![SymMatrix::zeros(point.dim()); point.n_classes()],
        }
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn center(&self) -> &SymMatrix {
        &self.center
    }

    pub fn class(&self, k: usize) -> &SymMatrix {
        &self.classes[k]
    }

    pub fn components(&self) -> impl Iterator<Item = &SymMatrix> {
        std::iter::once(&self.center).chain(self.classes.iter())
    }

    pub fn scale(&self, factor: f64) -> Self {
        let scale_one = |s: &SymMatrix| SymMatrix::symmetrize(&(s.matrix() * factor));
        Self {
            center: scale_one(&self.center),
            classes: self.classes.iter().map(scale_one).collect(),
        }
    }
}

/// The geodesic `A #_t B = A^1/2 (A^-1/2 B A^-1/2)^t A^1/2` of the
/// affine-invariant metric; `t = 1/2` is the geometric matrix mean.
///
/// The congruence intermediate may be ill-conditioned far beyond what either
/// endpoint is, so its spectral power uses the absolute positivity check.
pub fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let f = a.factors()?;
    let inner = SymMatrix::symmetrize(&(&f.inv_sqrt * b.matrix() * &f.inv_sqrt));
    let powered = crate::spd::positive_eig_map(&inner, |l| l.powf(t))?;
    SpdMatrix::new(&f.sqrt * powered * &f.sqrt)
}

/// Riemannian (affine-invariant) distance: the Frobenius norm of
/// `logm(A^-1/2 B A^-1/2)`, i.e. the root sum of squared log-eigenvalues of
/// `A^-1 B`.
pub fn riemannian_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let inv_sqrt = a.inv_sqrtm()?;
    let inner = SymMatrix::symmetrize(&(inv_sqrt.matrix() * b.matrix() * inv_sqrt.matrix()));
    let values = crate::spd::positive_eigenvalues(&inner)?;
    Ok(values.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn spd2(a: f64, b: f64, c: f64) -> SpdMatrix {
        SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[a, b, b, c])).unwrap()
    }

    fn point_of(kind: ManifoldKind, mats: Vec<SpdMatrix>) -> ProductPoint {
        let mut mats = mats;
        let center = mats.remove(0);
        ProductPoint::new(kind, center, mats).unwrap()
    }

    #[test]
    fn inner_at_identity_is_euclidean() {
        let theta = point_of(
            ManifoldKind::Spd,
            vec![SpdMatrix::identity(2), SpdMatrix::identity(2)],
        );
        let xi = theta
            .project_tangent(&[
                DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 0.5]),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 3.0]),
            ])
            .unwrap();
        let expected: f64 = xi
            .components()
            .map(|s| s.matrix().iter().map(|v| v * v).sum::<f64>())
            .sum();
        assert_relative_eq!(theta.inner(&xi, &xi).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn projection_is_idempotent() {
        let theta = point_of(ManifoldKind::UnitDetSpd, vec![SpdMatrix::identity(3)]);
        let raw = vec![DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 0.0, 4.0, -1.0, 1.0, 0.5, 0.0, 2.0],
        )];
        let once = theta.project_tangent(&raw).unwrap();
        let again = theta
            .project_tangent(&[once.center().matrix().clone()])
            .unwrap();
        assert_relative_eq!(
            once.center().matrix(),
            again.center().matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn unit_det_projection_of_identity_at_identity_vanishes() {
        let theta = point_of(ManifoldKind::UnitDetSpd, vec![SpdMatrix::identity(3)]);
        let xi = theta.project_tangent(&[DMatrix::identity(3, 3)]).unwrap();
        assert!(xi.center().frobenius_norm() < 1e-14);
    }

    #[test]
    fn exp_of_zero_is_identity_map() {
        let theta = point_of(ManifoldKind::Spd, vec![spd2(2.0, 0.3, 1.0)]);
        let out = theta.exp_map(&ProductTangent::zeros_like(&theta)).unwrap();
        assert_relative_eq!(
            out.center().matrix(),
            theta.center().matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn exp_at_identity_is_matrix_exponential() {
        let theta = point_of(ManifoldKind::Spd, vec![SpdMatrix::identity(2)]);
        let xi = theta
            .project_tangent(&[DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.1, -0.3])])
            .unwrap();
        let out = theta.exp_map(&xi).unwrap();
        let direct = xi.center().expm().unwrap();
        assert_relative_eq!(out.center().matrix(), direct.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn retract_of_zero_is_identity_map() {
        let theta = point_of(ManifoldKind::Spd, vec![spd2(1.5, -0.2, 0.8)]);
        let out = theta.retract(&ProductTangent::zeros_like(&theta)).unwrap();
        assert_relative_eq!(
            out.center().matrix(),
            theta.center().matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn retract_rejects_overlong_step() {
        // At the identity, R(xi) has eigenvalues 1 + l + l^2/2 per eigenvalue
        // l of xi. A direction mixing l near -1 with a huge positive l drives
        // the spectrum ratio past the SPD tolerance.
        let theta = point_of(ManifoldKind::Spd, vec![SpdMatrix::identity(2)]);
        let xi = theta
            .project_tangent(&[DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2e6])])
            .unwrap();
        let err = theta.retract(&xi).unwrap_err();
        assert!(matches!(err, crate::Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn unit_det_retraction_has_unit_determinant() {
        let a = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 0.7]))
            .unwrap();
        let scale = (-a.log_det().unwrap() / 2.0).exp();
        let a = SpdMatrix::new(a.matrix() * scale).unwrap();
        let theta = point_of(ManifoldKind::UnitDetSpd, vec![a]);
        let xi = theta
            .project_tangent(&[DMatrix::from_row_slice(2, 2, &[0.3, -0.1, -0.1, 0.2])])
            .unwrap();
        let out = theta.retract(&xi).unwrap();
        assert!(out.center().log_det().unwrap().abs() < 1e-12);
    }

    #[test]
    fn geodesic_endpoints() {
        let a = spd2(3.0, 0.4, 2.0);
        let b = spd2(1.0, -0.2, 0.5);
        assert_relative_eq!(
            geodesic(&a, &b, 0.0).unwrap().matrix(),
            a.matrix(),
            epsilon = 1e-10
        );
        assert_relative_eq!(
            geodesic(&a, &b, 1.0).unwrap().matrix(),
            b.matrix(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn geodesic_from_identity_is_matrix_power() {
        let b = spd2(2.0, 0.3, 1.2);
        let g = geodesic(&SpdMatrix::identity(2), &b, 0.25).unwrap();
        assert_relative_eq!(
            g.matrix(),
            b.powm(0.25).unwrap().matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn distance_identities() {
        let a = spd2(1.7, 0.2, 0.9);
        assert!(riemannian_distance(&a, &a).unwrap() < 1e-12);
        let e = std::f64::consts::E;
        let scaled = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[e, 0.0, 0.0, e])).unwrap();
        assert_relative_eq!(
            riemannian_distance(&SpdMatrix::identity(2), &scaled).unwrap(),
            2.0f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = spd2(1.0, 0.0, 1.0);
        let b = SpdMatrix::identity(3);
        assert!(matches!(
            riemannian_distance(&a, &b),
            Err(crate::Error::DimensionMismatch { .. })
        ));
    }
}
