//! Step-size theory: the 3x3 gain matrix `Φ(α)` that bounds the joint
//! evolution of the consensus, optimality and tracking errors, its critical
//! step `α*` (smallest positive root of `det(I₃ − Φ(α)) = 0`) and the
//! admissible range `0 < α < min{α*, (m+n)/(2(μ₁+μ₂))}`.

use nalgebra::{DMatrix, Matrix3};

use crate::error::{domain, Error, Result};
use crate::game::ClusterGameSpec;
use crate::linalg::spectral_norm;
use crate::topology::CompositeMixing;

/// Every scalar the gain matrix depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainConstants {
    pub sigma: f64,
    pub sigma_max: f64,
    pub a1: f64,
    pub a11: f64,
    pub a12: f64,
    pub a13: f64,
    pub a21: f64,
    pub a23: f64,
    pub a31: f64,
    pub a32: f64,
    pub a33: f64,
    pub lipschitz: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub clusters: usize,
    pub agents: usize,
    pub pi_min: f64,
    pub pi_max: f64,
    /// `‖𝒜_∞‖₂ = √n ‖π‖₂`.
    pub norm_a_inf: f64,
    /// `‖Iₙ − 𝒜_∞‖₂`.
    pub norm_i_minus_a_inf: f64,
    /// `‖𝒜 − Iₙ‖₂`.
    pub norm_a_minus_i: f64,
}

pub fn gain_constants(mixing: &CompositeMixing, game: &ClusterGameSpec) -> Result<GainConstants> {
    if mixing.cluster_sizes() != game.cluster_sizes() {
        return Err(domain("mixing topology and game disagree on cluster sizes"));
    }
    let n = mixing.agent_count();
    let m = mixing.cluster_count();
    let c = game.constants();
    let l = c.lipschitz;
    let sqrt_m = (m as f64).sqrt();

    let pi_min = mixing.pi_min();
    let pi_max = mixing.pi_max();
    let inv_sqrt_pi_min = pi_min.powf(-0.5);

    let a_inf = mixing.consensus_matrix();
    let ident = DMatrix::<f64>::identity(n, n);
    let norm_a_inf = (n as f64).sqrt() * mixing.pi().norm();
    let norm_i_minus_a_inf = spectral_norm(&(&ident - &a_inf));
    let norm_a_minus_i = spectral_norm(&(mixing.matrix() - &ident));

    let base1 = pi_max.sqrt() * norm_i_minus_a_inf;
    Ok(GainConstants {
        sigma: mixing.sigma(),
        sigma_max: mixing.sigma_max(),
        a1: l * sqrt_m * norm_a_minus_i * inv_sqrt_pi_min,
        a11: base1 * l * sqrt_m * inv_sqrt_pi_min,
        a12: base1 * l * sqrt_m,
        a13: base1,
        a21: l * norm_a_inf * inv_sqrt_pi_min,
        a23: norm_a_inf,
        a31: l * l * m as f64 * inv_sqrt_pi_min,
        a32: l * l * m as f64,
        a33: l * sqrt_m,
        lipschitz: l,
        mu1: c.mu1,
        mu2: c.mu2,
        clusters: m,
        agents: n,
        pi_min,
        pi_max,
        norm_a_inf,
        norm_i_minus_a_inf,
        norm_a_minus_i,
    })
}

impl GainConstants {
    /// `(m+n)/(2(μ₁+μ₂))`: largest step for which `φ(α)` is guaranteed real.
    pub fn radicand_bound(&self) -> f64 {
        (self.clusters + self.agents) as f64 / (2.0 * (self.mu1 + self.mu2))
    }

    /// `φ(α) = √(1 − 2α(μ₁+μ₂)/(m+n) + α² L ‖𝒜_∞‖²)`.
    pub fn phi(&self, alpha: f64) -> f64 {
        let mn = (self.clusters + self.agents) as f64;
        let rad = 1.0 - 2.0 * alpha * (self.mu1 + self.mu2) / mn
            + alpha * alpha * self.lipschitz * self.norm_a_inf * self.norm_a_inf;
        rad.max(0.0).sqrt()
    }
}

/// The gain matrix; defined for `0 ≤ α ≤ (m+n)/(2(μ₁+μ₂))`.
pub fn phi_matrix(alpha: f64, c: &GainConstants) -> Result<Matrix3<f64>> {
    let bound = c.radicand_bound();
    if !(alpha >= 0.0 && alpha <= bound) {
        return Err(domain(format!(
            "step {alpha} outside the admissible range [0, {bound}]"
        )));
    }
    Ok(Matrix3::new(
        c.sigma + alpha * c.a11,
        alpha * c.a12,
        alpha * c.a13,
        alpha * c.a21,
        c.phi(alpha),
        alpha * c.a23,
        c.a1 + alpha * c.a31,
        alpha * c.a32,
        c.sigma_max + alpha * c.a33,
    ))
}

fn charpoly_at(m: &Matrix3<f64>, lambda: f64) -> f64 {
    (Matrix3::identity() * lambda - m).determinant()
}

fn polish_real_root(m: &Matrix3<f64>, mut r: f64) -> f64 {
    for _ in 0..8 {
        let f = charpoly_at(m, r);
        // derivative of det(λI − M) = sum of principal 2x2 minors of (λI − M)
        let b = Matrix3::identity() * r - m;
        let d = b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)] + b[(0, 0)] * b[(2, 2)]
            - b[(0, 2)] * b[(2, 0)]
            + b[(0, 0)] * b[(1, 1)]
            - b[(0, 1)] * b[(1, 0)];
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = f / d;
        let next = r - step;
        // only accept steps that do not make the residual worse
        if charpoly_at(m, next).abs() > f.abs() {
            break;
        }
        r = next;
        if step.abs() <= 1e-12 * r.abs().max(1.0) {
            break;
        }
    }
    r
}

/// Largest eigenvalue modulus of a 3x3 real matrix, from the closed-form roots
/// of its characteristic cubic with Newton polishing of the real roots.
pub fn spectral_radius_3x3(m: &Matrix3<f64>) -> f64 {
    // λ³ + a λ² + b λ + c
    let a = -m.trace();
    let b = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let c = -m.determinant();

    // depressed cubic t³ + p t + r with λ = t − a/3
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let r = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (r / 2.0).powi(2) + (p / 3.0).powi(3);

    if disc <= 0.0 && p < 0.0 {
        // three real roots
        let k = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * r / (p * k)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|i| {
                let t = k * (theta - 2.0 * std::f64::consts::PI * i as f64 / 3.0).cos();
                polish_real_root(m, t - shift).abs()
            })
            .fold(0.0, f64::max)
    } else {
        let s = disc.max(0.0).sqrt();
        let t = (-r / 2.0 + s).cbrt() + (-r / 2.0 - s).cbrt();
        let real = polish_real_root(m, t - shift);
        // deflate: λ² + (a + real) λ + (b + real (a + real))
        let qb = a + real;
        let qc = b + real * qb;
        let qd = qb * qb - 4.0 * qc;
        let other = if qd >= 0.0 {
            let sq = qd.sqrt();
            ((-qb + sq) / 2.0).abs().max(((-qb - sq) / 2.0).abs())
        } else {
            // complex pair, modulus² = product of the roots
            qc.max(0.0).sqrt()
        };
        real.abs().max(other)
    }
}

/// Result of the `α*` root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaStar {
    pub value: f64,
    /// No root below the radicand bound; `value` is the bound itself.
    pub bound_limited: bool,
    /// `det(I₃ − Φ(value))`.
    pub det_residual: f64,
    /// `ρ(Φ(α*−ε)) < 1` and `ρ(Φ(α*+ε)) ≥ 1` with `ε = 1e-6 α*`.
    pub crosses_unit_radius: bool,
}

fn det_i_minus_phi(alpha: f64, c: &GainConstants) -> f64 {
    let phi = phi_matrix(alpha, c).expect("alpha within radicand bound");
    (Matrix3::identity() - phi).determinant()
}

/// Smallest positive root of `det(I₃ − Φ(α)) = 0`.
///
/// Scans upward in steps of `1e-4` of the radicand bound; if the determinant is
/// already nonpositive at the first scan point the step shrinks by factors of
/// ten until a positive value brackets the root. Bisection then narrows the
/// bracket to `1e-12` relative width.
pub fn alpha_star(c: &GainConstants) -> Result<AlphaStar> {
    if !(c.a1 > 0.0) {
        return Err(Error::Precondition(
            "a1 = 0: the gain matrix is reducible (single-agent or disagreement-free network)".into(),
        ));
    }
    let bound = c.radicand_bound();
    let h = 1e-4 * bound;

    let bracket = if det_i_minus_phi(h, c) > 0.0 {
        let mut lo = h;
        let mut found = None;
        let mut k = 1u64;
        while found.is_none() {
            k += 1;
            let hi = (k as f64 * h).min(bound);
            if det_i_minus_phi(hi, c) <= 0.0 {
                found = Some((lo, hi));
            } else if hi >= bound {
                break;
            }
            lo = hi;
        }
        found
    } else {
        let mut hi = h;
        let mut lo = h / 10.0;
        while det_i_minus_phi(lo, c) <= 0.0 {
            hi = lo;
            lo /= 10.0;
            if lo < bound * 1e-30 {
                return Err(Error::Precondition(
                    "det(I - Phi(alpha)) is nonpositive for every probed alpha > 0".into(),
                ));
            }
        }
        Some((lo, hi))
    };

    let Some((mut lo, mut hi)) = bracket else {
        return Ok(AlphaStar {
            value: bound,
            bound_limited: true,
            det_residual: det_i_minus_phi(bound, c),
            crosses_unit_radius: false,
        });
    };
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if det_i_minus_phi(mid, c) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let value = 0.5 * (lo + hi);
    let eps = 1e-6 * value;
    let below = spectral_radius_3x3(&phi_matrix(value - eps, c)?);
    let above = phi_matrix((value + eps).min(bound), c).map(|p| spectral_radius_3x3(&p))?;
    Ok(AlphaStar {
        value,
        bound_limited: false,
        det_residual: det_i_minus_phi(value, c),
        crosses_unit_radius: below < 1.0 && above >= 1.0,
    })
}

/// `min{α*, (m+n)/(2(μ₁+μ₂))}`.
pub fn max_step(c: &GainConstants) -> Result<f64> {
    Ok(alpha_star(c)?.value.min(c.radicand_bound()))
}

/// Summary printed by the `compute-bound` command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBound {
    pub sigma: f64,
    pub sigma_max: f64,
    pub alpha_star: AlphaStar,
    pub radicand_bound: f64,
    pub max_step: f64,
    pub rho_at_half_bound: f64,
}

pub fn step_bound(mixing: &CompositeMixing, game: &ClusterGameSpec) -> Result<StepBound> {
    let c = gain_constants(mixing, game)?;
    let star = alpha_star(&c)?;
    let radicand_bound = c.radicand_bound();
    let max_step = star.value.min(radicand_bound);
    Ok(StepBound {
        sigma: c.sigma,
        sigma_max: c.sigma_max,
        alpha_star: star,
        radicand_bound,
        max_step,
        rho_at_half_bound: spectral_radius_3x3(&phi_matrix(0.5 * max_step, &c)?),
    })
}
