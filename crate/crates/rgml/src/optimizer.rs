//! Riemannian gradient descent with backtracking line search over the product
//! manifold, with per-iteration convergence tracing.

use std::io::Write;

use crate::costs::PairDifferences;
use crate::error::{Error, Result};
use crate::manifold::{ManifoldKind, ProductPoint};
use crate::spd::{SpdMatrix, SymMatrix};

/// Gradient-descent controls. Gradient norms are measured in the
/// affine-invariant metric of the iterate.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub grad_norm_tol: f64,
    pub initial_step: f64,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub min_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_norm_tol: 1e-6,
            initial_step: 1.0,
            armijo_shrink: 0.5,
            armijo_slope: 1e-4,
            min_step: 1e-12,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.grad_norm_tol > 0.0
            && self.initial_step > 0.0
            && self.armijo_shrink > 0.0
            && self.armijo_shrink < 1.0
            && self.armijo_slope > 0.0
            && self.min_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("invalid solver options".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIters,
    LineSearchFailed,
}

/// One row of the convergence trace. `step` is the accepted step length used
/// to leave this iterate (zero on the terminal record).
#[derive(Debug, Clone, Copy)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
}

/// Full convergence trace; the cost column is non-increasing by construction
/// (only strictly improving Armijo steps are accepted).
#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<IterRecord>,
    pub status: SolverStatus,
}

impl SolverTrace {
    /// Number of accepted descent steps.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.cost)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.grad_norm)
    }

    /// Writes the trace as CSV with header `iter,cost,grad_norm,step`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,cost,grad_norm,step")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{}", r.iter, r.cost, r.grad_norm, r.step)?;
        }
        Ok(())
    }
}

/// Minimizes `cost` by Riemannian gradient descent from `theta0`.
///
/// The descent direction is minus the Riemannian gradient obtained from
/// `egrad` through the metric. Steps use the second-order retraction with
/// Armijo backtracking: a trial `alpha` is accepted when
/// `cost(R(-alpha g)) <= cost(theta) - slope * alpha * |g|^2`. A retraction
/// that leaves the SPD cone counts as a rejected trial. Each line search
/// starts from twice the previously accepted step (`initial_step` on the
/// first iteration), so the step length adapts to the local curvature in both
/// directions.
///
/// Returns the best (final) iterate together with the full trace; running out
/// of steps yields status `LineSearchFailed` rather than an error.
pub fn minimize<C, G>(
    cost: C,
    egrad: G,
    theta0: ProductPoint,
    opts: &SolverOptions,
) -> Result<(ProductPoint, SolverTrace)>
where
    C: Fn(&ProductPoint) -> Result<f64>,
    G: Fn(&ProductPoint) -> Result<Vec<nalgebra::DMatrix<f64>>>,
{
    opts.validate()?;
    let mut theta = theta0;
    let mut current_cost = cost(&theta)?;
    if !current_cost.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "cost at initial point is {current_cost}"
        )));
    }

    let mut records: Vec<IterRecord> = Vec::new();
    let mut ls_start = opts.initial_step;

    for iter in 0..opts.max_iters {
        let grad = theta.egrad_to_rgrad(&egrad(&theta)?)?;
        let grad_sq = theta.inner(&grad, &grad)?;
        let grad_norm = grad_sq.sqrt();

        if grad_norm <= opts.grad_norm_tol {
            records.push(IterRecord {
                iter,
                cost: current_cost,
                grad_norm,
                step: 0.0,
            });
            return Ok((
                theta,
                SolverTrace {
                    records,
                    status: SolverStatus::Converged,
                },
            ));
        }

        let accepted = line_search(
            &cost,
            &theta,
            &grad,
            grad_sq,
            current_cost,
            ls_start,
            opts,
        )?;

        match accepted {
            Some((alpha, next, next_cost)) => {
                records.push(IterRecord {
                    iter,
                    cost: current_cost,
                    grad_norm,
                    step: alpha,
                });
                theta = next;
                current_cost = next_cost;
                ls_start = alpha;
            }
            None => {
                records.push(IterRecord {
                    iter,
                    cost: current_cost,
                    grad_norm,
                    step: 0.0,
                });
                return Ok((
                    theta,
                    SolverTrace {
                        records,
                        status: SolverStatus::LineSearchFailed,
                    },
                ));
            }
        }
    }

    let grad = theta.egrad_to_rgrad(&egrad(&theta)?)?;
    let grad_norm = theta.inner(&grad, &grad)?.sqrt();
    records.push(IterRecord {
        iter: opts.max_iters,
        cost: current_cost,
        grad_norm,
        step: 0.0,
    });
    Ok((
        theta,
        SolverTrace {
            records,
            status: SolverStatus::MaxIters,
        },
    ))
}

/// Armijo backtracking from `start`, followed by greedy probing around the
/// accepted step: as long as the first trial was accepted, larger steps
/// (ratio `1/shrink`) are taken while they strictly lower the cost and keep
/// the Armijo inequality, and failing that, smaller steps while they strictly
/// lower it. The probing removes the stall of plain backtracking when `start`
/// chronically overshoots to a near-equal-cost point, and lets the step grow
/// to match the local curvature.
///
/// Returns `None` when no step above `min_step` satisfies the Armijo
/// inequality.
#[allow(clippy::too_many_arguments)]
fn line_search<C>(
    cost: &C,
    theta: &ProductPoint,
    grad: &crate::manifold::ProductTangent,
    grad_sq: f64,
    current_cost: f64,
    start: f64,
    opts: &SolverOptions,
) -> Result<Option<(f64, ProductPoint, f64)>>
where
    C: Fn(&ProductPoint) -> Result<f64>,
{
    let armijo = |alpha: f64, trial_cost: f64| {
        trial_cost <= current_cost - opts.armijo_slope * alpha * grad_sq
    };
    let try_step = |alpha: f64| -> Result<Option<(ProductPoint, f64)>> {
        match theta.retract(&grad.scale(-alpha)) {
            Ok(trial) => {
                let c = cost(&trial)?;
                Ok(Some((trial, c)))
            }
            // Leaving the cone means the step was too long; treat as a
            // rejected trial.
            Err(Error::NotPositiveDefinite { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut alpha = start;
    let mut best: Option<(f64, ProductPoint, f64)> = None;
    while alpha >= opts.min_step {
        if let Some((trial, c)) = try_step(alpha)? {
            if armijo(alpha, c) {
                best = Some((alpha, trial, c));
                break;
            }
        }
        alpha *= opts.armijo_shrink;
    }
    let (mut alpha, mut point, mut value) = match best {
        Some(b) => b,
        None => return Ok(None),
    };

    if alpha == start {
        let grow = 1.0 / opts.armijo_shrink;
        let mut expanded = false;
        for _ in 0..MAX_GROWTH_PROBES {
            let bigger = alpha * grow;
            match try_step(bigger)? {
                Some((trial, c)) if c < value && armijo(bigger, c) => {
                    alpha = bigger;
                    point = trial;
                    value = c;
                    expanded = true;
                }
                _ => break,
            }
        }
        if !expanded {
            // A strictly better smaller step automatically satisfies the
            // Armijo inequality (the bound loosens as alpha shrinks).
            for _ in 0..MAX_GROWTH_PROBES {
                let smaller = alpha * opts.armijo_shrink;
                if smaller < opts.min_step {
                    break;
                }
                match try_step(smaller)? {
                    Some((trial, c)) if c < value => {
                        alpha = smaller;
                        point = trial;
                        value = c;
                    }
                    _ => break,
                }
            }
        }
    }
    Ok(Some((alpha, point, value)))
}

const MAX_GROWTH_PROBES: usize = 20;

/// Shared starting point for both costs: every component set to half the
/// pooled pair scatter (its expectation is the mean class covariance),
/// ridge-regularized if needed, and determinant-normalized on the
/// unit-determinant manifold.
pub fn default_init(pairs: &PairDifferences, kind: ManifoldKind) -> Result<ProductPoint> {
    let scatter = pairs.scatter();
    let half_pooled = SymMatrix::symmetrize(&(scatter.pooled_similar().matrix() * 0.5));
    let base = crate::baselines::ridge_to_spd(&half_pooled)?;
    let base = match kind {
        ManifoldKind::Spd => base,
        ManifoldKind::UnitDetSpd => {
            let p = base.dim() as f64;
            let scale = (-base.log_det()? / p).exp();
            SpdMatrix::new(base.matrix() * scale)?
        }
    };
    let classes = vec![base.clone(); pairs.n_classes()];
    Ok(ProductPoint::new_normalized(kind, base, classes))
}
