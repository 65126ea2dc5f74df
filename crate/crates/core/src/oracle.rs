//! Centralized Nash equilibrium computation on the reduced consensual
//! coordinates `y ∈ ℝ^q`. Used as ground truth for the distributed methods.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{ne_residual, probe_affine, ClusterGameSpec, ConsensualPoint};
use crate::linalg::{condition_number, spectral_norm};

/// Largest residual an oracle solution may carry.
pub const ORACLE_RESIDUAL_TOL: f64 = 1e-8;
const CONDITION_WARN: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    LinearSolve,
    Descent,
}

impl OracleMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LinearSolve => "linear_solve",
            Self::Descent => "descent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub point: ConsensualPoint,
    pub residual: f64,
    pub method: OracleMethod,
    /// Condition number of the reduced linear system (linear solve only).
    pub condition_number: Option<f64>,
    /// Gradient steps taken (descent only).
    pub iterations: usize,
}

/// Solves `col(Σⱼ ∇ᵢf_ij(y)) = 0` for an affine game.
pub fn solve_ne_linear(spec: &ClusterGameSpec) -> Result<OracleSolution> {
    let probe = probe_affine(spec.cluster_sizes(), spec.strategy_dims(), spec.objective())?;
    let jac = probe.reduced_jacobian(false);
    let rhs = -probe.reduced_offset(false);
    let cond = condition_number(&jac);
    if cond > CONDITION_WARN {
        log::warn!("reduced NE system is ill-conditioned (condition number {cond:e})");
    }
    let lu = jac.clone().lu();
    let mut y = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("reduced Jacobian is singular; the NE is not unique".into()))?;
    // one round of iterative refinement against the game's own gradients
    let r = spec.cluster_gradient_sums(y.as_slice());
    if let Some(dy) = lu.solve(&r) {
        let refined = &y - dy;
        if spec.cluster_gradient_sums(refined.as_slice()).norm() < r.norm() {
            y = refined;
        }
    }
    let point = ConsensualPoint::new(spec, y)?;
    let residual = ne_residual(spec, &point);
    if !(residual <= ORACLE_RESIDUAL_TOL) {
        return Err(Error::Singular(format!(
            "linear solve left residual {residual:e} (condition number {cond:e})"
        )));
    }
    Ok(OracleSolution {
        point,
        residual,
        method: OracleMethod::LinearSolve,
        condition_number: Some(cond),
        iterations: 0,
    })
}

/// Forward-difference Jacobian of the cluster-averaged map at `y`.
fn averaged_jacobian_fd(spec: &ClusterGameSpec, y: &DVector<f64>) -> DMatrix<f64> {
    let q = spec.total_dim();
    let base = spec.cluster_gradient_means(y.as_slice());
    let mut jac = DMatrix::zeros(q, q);
    let mut p = y.clone();
    for k in 0..q {
        let h = 1e-6 * (1.0 + y[k].abs());
        p[k] = y[k] + h;
        let col = (spec.cluster_gradient_means(p.as_slice()) - &base) / h;
        jac.set_column(k, &col);
        p[k] = y[k];
    }
    jac
}

/// Lipschitz estimate of the averaged map from Jacobians probed at the start
/// point and a few random points around it.
fn probe_lipschitz(spec: &ClusterGameSpec, y0: &DVector<f64>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11b5);
    let mut best = spectral_norm(&averaged_jacobian_fd(spec, y0));
    for _ in 0..4 {
        let y = y0 + DVector::from_fn(y0.len(), |_, _| rng.random_range(-1.0..1.0) * (1.0 + y0.amax()));
        best = best.max(spectral_norm(&averaged_jacobian_fd(spec, &y)));
    }
    best
}

/// Projected-free gradient play on the averaged map with step `μ₁ / L̄²`.
pub fn solve_ne_descent(
    spec: &ClusterGameSpec,
    start: Option<&ConsensualPoint>,
    tol: f64,
    max_iters: usize,
) -> Result<OracleSolution> {
    let mut y = match start {
        Some(p) => ConsensualPoint::new(spec, p.as_vector().clone())?.into_inner(),
        None => DVector::zeros(spec.total_dim()),
    };
    let mu1 = spec.constants().mu1;
    let lbar = probe_lipschitz(spec, &y).max(mu1);
    let eta = mu1 / (lbar * lbar);

    let mut residual = spec.cluster_gradient_sums(y.as_slice()).norm();
    let mut iterations = 0;
    while residual > tol {
        if iterations >= max_iters {
            return Err(Error::NoConvergence { iterations, residual });
        }
        let g = spec.cluster_gradient_means(y.as_slice());
        y -= g * eta;
        iterations += 1;
        residual = spec.cluster_gradient_sums(y.as_slice()).norm();
        if !residual.is_finite() {
            return Err(Error::Divergence {
                iteration: iterations,
                reason: "descent produced a non-finite residual".into(),
            });
        }
    }
    Ok(OracleSolution {
        point: ConsensualPoint::new(spec, y)?,
        residual,
        method: OracleMethod::Descent,
        condition_number: None,
        iterations,
    })
}
