//! Metric learning on the manifold of symmetric positive definite matrices.
//!
//! The crate jointly estimates one regularized covariance matrix per class and
//! their Riemannian barycenter by gradient descent on the product manifold
//! `(S_p^+)^{K+1}` (or its unit-determinant submanifold), with a Gaussian and
//! a Tyler per-class cost. The learned center matrix feeds a Mahalanobis
//! k-nearest-neighbors benchmark harness with repeated cross-validation and
//! label-noise injection.

pub mod baselines;
pub mod bench;
pub mod costs;
pub mod error;
pub mod manifold;
pub mod optimizer;
pub mod spd;

pub use error::{Error, Result};
