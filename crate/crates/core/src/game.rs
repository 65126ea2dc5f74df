//! Multi-cluster games: local gradients, regularity constants, the Cournot
//! benchmark and a family of affine (quadratic-payoff) games.
//!
//! Every local gradient is evaluated on a stacked point in `ℝ^q` that holds
//! one block per cluster. Block `i` is the evaluating agent's own strategy,
//! the other blocks are its estimates of the other clusters' representatives.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, spectral_norm};
use crate::topology::GraphTopology;

/// Per-agent payoff data. Implementations must be pure.
pub trait LocalObjective: Send + Sync {
    /// Writes `∇ᵢf_ij` at `point` into `out` (length `qᵢ`).
    fn gradient(&self, cluster: usize, agent: usize, point: &[f64], out: &mut [f64]);

    /// `f_ij` at `point`, when the payoff is known in closed form.
    fn payoff(&self, _cluster: usize, _agent: usize, _point: &[f64]) -> Option<f64> {
        None
    }
}

/// Lipschitz and strong-monotonicity constants consumed by the step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityConstants {
    /// Max over agents of the gradient Lipschitz constant.
    pub lipschitz: f64,
    /// Strong monotonicity of the cluster-averaged gradient map.
    pub mu1: f64,
    /// Strong monotonicity of the cluster-summed gradient map.
    pub mu2: f64,
}

#[derive(Clone)]
pub struct ClusterGameSpec {
    cluster_sizes: Vec<usize>,
    strategy_dims: Vec<usize>,
    block_offsets: Vec<usize>,
    objective: Arc<dyn LocalObjective>,
    constants: RegularityConstants,
}

impl std::fmt::Debug for ClusterGameSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClusterGameSpec")
            .field("cluster_sizes", &self.cluster_sizes)
            .field("strategy_dims", &self.strategy_dims)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

fn check_shape(cluster_sizes: &[usize], strategy_dims: &[usize]) -> Result<()> {
    if cluster_sizes.is_empty() {
        return Err(domain("a game needs at least one cluster"));
    }
    if cluster_sizes.len() != strategy_dims.len() {
        return Err(domain(format!(
            "{} cluster sizes but {} strategy dimensions",
            cluster_sizes.len(),
            strategy_dims.len()
        )));
    }
    if cluster_sizes.contains(&0) || strategy_dims.contains(&0) {
        return Err(domain("cluster sizes and strategy dimensions must be positive"));
    }
    Ok(())
}

impl ClusterGameSpec {
    pub fn new(
        cluster_sizes: Vec<usize>,
        strategy_dims: Vec<usize>,
        objective: Arc<dyn LocalObjective>,
        constants: RegularityConstants,
    ) -> Result<Self> {
        check_shape(&cluster_sizes, &strategy_dims)?;
        let RegularityConstants { lipschitz, mu1, mu2 } = constants;
        if !(lipschitz > 0.0 && mu1 > 0.0 && mu2 > 0.0) || ![lipschitz, mu1, mu2].iter().all(|v| v.is_finite()) {
            return Err(Error::Precondition(format!(
                "regularity constants must be positive (L = {lipschitz}, mu1 = {mu1}, mu2 = {mu2})"
            )));
        }
        let mut block_offsets = Vec::with_capacity(strategy_dims.len());
        let mut acc = 0;
        for &d in &strategy_dims {
            block_offsets.push(acc);
            acc += d;
        }
        Ok(Self {
            cluster_sizes,
            strategy_dims,
            block_offsets,
            objective,
            constants,
        })
    }

    /// Builds a spec for an affine game, probing the constants from the gradients.
    pub fn with_derived_constants(
        cluster_sizes: Vec<usize>,
        strategy_dims: Vec<usize>,
        objective: Arc<dyn LocalObjective>,
    ) -> Result<Self> {
        let constants = derive_quadratic_constants(&cluster_sizes, &strategy_dims, objective.as_ref())?;
        Self::new(cluster_sizes, strategy_dims, objective, constants)
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    pub fn strategy_dims(&self) -> &[usize] {
        &self.strategy_dims
    }

    /// `n = Σ nᵢ`.
    pub fn agent_count(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    /// `q = Σ qᵢ`.
    pub fn total_dim(&self) -> usize {
        self.strategy_dims.iter().sum()
    }

    /// `N = Σ nᵢqᵢ`.
    pub fn profile_dim(&self) -> usize {
        self.cluster_sizes.iter().zip(&self.strategy_dims).map(|(n, q)| n * q).sum()
    }

    /// Column offset of cluster `i`'s block inside a stacked point.
    pub fn block_offset(&self, cluster: usize) -> usize {
        self.block_offsets[cluster]
    }

    pub fn block_range(&self, cluster: usize) -> std::ops::Range<usize> {
        let o = self.block_offsets[cluster];
        o..o + self.strategy_dims[cluster]
    }

    pub fn constants(&self) -> RegularityConstants {
        self.constants
    }

    pub fn objective(&self) -> &dyn LocalObjective {
        self.objective.as_ref()
    }

    /// Unchecked gradient evaluation used on hot paths.
    #[inline]
    pub fn gradient_into(&self, cluster: usize, agent: usize, point: &[f64], out: &mut [f64]) {
        self.objective.gradient(cluster, agent, point, out);
    }

    pub fn gradient(&self, cluster: usize, agent: usize, point: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.strategy_dims[cluster]];
        self.objective.gradient(cluster, agent, point, &mut out);
        out
    }

    /// `col(Σⱼ ∇ᵢf_ij(y))` over clusters, every agent evaluated at `y`.
    pub fn cluster_gradient_sums(&self, y: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.total_dim());
        let mut buf = vec![0.0; self.strategy_dims.iter().copied().max().unwrap_or(0)];
        for i in 0..self.cluster_count() {
            let r = self.block_range(i);
            let g = &mut buf[..r.len()];
            for j in 0..self.cluster_sizes[i] {
                self.objective.gradient(i, j, y, g);
                for (k, v) in r.clone().zip(g.iter()) {
                    out[k] += v;
                }
            }
        }
        out
    }

    /// `col((1/nᵢ) Σⱼ ∇ᵢf_ij(y))`.
    pub fn cluster_gradient_means(&self, y: &[f64]) -> DVector<f64> {
        let mut s = self.cluster_gradient_sums(y);
        for i in 0..self.cluster_count() {
            let inv = 1.0 / self.cluster_sizes[i] as f64;
            for k in self.block_range(i) {
                s[k] *= inv;
            }
        }
        s
    }
}

/// Reduced coordinates of a point in which every cluster agrees internally.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensualPoint(DVector<f64>);

impl ConsensualPoint {
    pub fn new(spec: &ClusterGameSpec, y: DVector<f64>) -> Result<Self> {
        if y.len() != spec.total_dim() {
            return Err(domain(format!(
                "consensual point has {} entries, game has q = {}",
                y.len(),
                spec.total_dim()
            )));
        }
        Ok(Self(y))
    }

    pub fn zeros(spec: &ClusterGameSpec) -> Self {
        Self(DVector::zeros(spec.total_dim()))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn block(&self, spec: &ClusterGameSpec, cluster: usize) -> Vec<f64> {
        self.0.as_slice()[spec.block_range(cluster)].to_vec()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Checked evaluation of `∇ᵢf_ij(own, estimates)`.
///
/// `estimates` is the full stacked point; its block `i` must equal `own`.
pub fn eval_local_gradient(
    spec: &ClusterGameSpec,
    cluster: usize,
    agent: usize,
    own: &[f64],
    estimates: &[f64],
) -> Result<Vec<f64>> {
    if cluster >= spec.cluster_count() || agent >= spec.cluster_sizes()[cluster] {
        return Err(domain(format!("agent ({cluster}, {agent}) does not exist")));
    }
    if own.len() != spec.strategy_dims()[cluster] || estimates.len() != spec.total_dim() {
        return Err(domain(format!(
            "expected own strategy of length {} and estimates of length {}",
            spec.strategy_dims()[cluster],
            spec.total_dim()
        )));
    }
    if estimates[spec.block_range(cluster)] != *own {
        return Err(domain("own block of the estimates differs from the own strategy"));
    }
    Ok(spec.gradient(cluster, agent, estimates))
}

/// `F = col(g₁, …, g_m)` at a consensual point, in `ℝ^N`.
pub fn game_mapping(spec: &ClusterGameSpec, point: &ConsensualPoint) -> Result<DVector<f64>> {
    if point.0.len() != spec.total_dim() {
        return Err(domain("consensual point does not match the game"));
    }
    let mut out = Vec::with_capacity(spec.profile_dim());
    for i in 0..spec.cluster_count() {
        for j in 0..spec.cluster_sizes()[i] {
            out.extend(spec.gradient(i, j, point.as_slice()));
        }
    }
    Ok(DVector::from_vec(out))
}

/// `√(Σᵢ ‖Σⱼ ∇ᵢf_ij(y)‖²)`; zero exactly at a Nash equilibrium.
pub fn ne_residual(spec: &ClusterGameSpec, point: &ConsensualPoint) -> f64 {
    spec.cluster_gradient_sums(point.as_slice()).norm()
}

/// Affinity and constant probing for games whose gradients are affine.
#[derive(Debug, Clone)]
pub struct AffineProbe {
    /// Per-agent Jacobians (`qᵢ x q`), indexed `[cluster][agent]`.
    pub jacobians: Vec<Vec<DMatrix<f64>>>,
    /// Per-agent gradients at the origin.
    pub offsets: Vec<Vec<DVector<f64>>>,
}

const AFFINE_TOL: f64 = 1e-9;
const PROBE_SEED: u64 = 0x5eed_a551;

/// Recovers every agent's affine gradient by probing unit directions, then
/// checks additivity at random points.
pub fn probe_affine(
    cluster_sizes: &[usize],
    strategy_dims: &[usize],
    objective: &dyn LocalObjective,
) -> Result<AffineProbe> {
    check_shape(cluster_sizes, strategy_dims)?;
    let q: usize = strategy_dims.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut jacobians = Vec::with_capacity(cluster_sizes.len());
    let mut offsets = Vec::with_capacity(cluster_sizes.len());
    let zero = vec![0.0; q];
    for (i, (&ni, &qi)) in cluster_sizes.iter().zip(strategy_dims).enumerate() {
        let mut jac_i = Vec::with_capacity(ni);
        let mut off_i = Vec::with_capacity(ni);
        for j in 0..ni {
            let eval = |p: &[f64]| {
                let mut g = DVector::zeros(qi);
                objective.gradient(i, j, p, g.as_mut_slice());
                g
            };
            let g0 = eval(&zero);
            let mut jac = DMatrix::zeros(qi, q);
            let mut e = zero.clone();
            for k in 0..q {
                e[k] = 1.0;
                jac.set_column(k, &(eval(&e) - &g0));
                e[k] = 0.0;
            }
            for _ in 0..3 {
                let x: Vec<f64> = (0..q).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..q).map(|_| rng.random_range(-2.0..2.0)).collect();
                let (a, b): (f64, f64) = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
                let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
                let lhs = eval(&mix);
                let rhs = eval(&x) * a + eval(&y) * b + &g0 * (1.0 - a - b);
                let scale = 1.0 + lhs.norm().max(rhs.norm());
                if (lhs - rhs).norm() > AFFINE_TOL * scale {
                    return Err(Error::Unsupported(format!(
                        "gradient of agent ({i}, {j}) is not affine; supply constants explicitly"
                    )));
                }
            }
            jac_i.push(jac);
            off_i.push(g0);
        }
        jacobians.push(jac_i);
        offsets.push(off_i);
    }
    Ok(AffineProbe { jacobians, offsets })
}

impl AffineProbe {
    /// Jacobian of `y ↦ col(Σⱼ ∇ᵢf_ij(y))`, optionally divided by `nᵢ`.
    pub fn reduced_jacobian(&self, averaged: bool) -> DMatrix<f64> {
        let q = self.jacobians[0][0].ncols();
        let mut out = DMatrix::zeros(q, q);
        let mut row = 0;
        for agents in &self.jacobians {
            let qi = agents[0].nrows();
            let scale = if averaged { 1.0 / agents.len() as f64 } else { 1.0 };
            let mut block = DMatrix::zeros(qi, q);
            for jac in agents {
                block += jac;
            }
            out.rows_mut(row, qi).copy_from(&(block * scale));
            row += qi;
        }
        out
    }

    /// `col(Σⱼ ∇ᵢf_ij(0))`.
    pub fn reduced_offset(&self, averaged: bool) -> DVector<f64> {
        let mut parts = Vec::new();
        for agents in &self.offsets {
            let scale = if averaged { 1.0 / agents.len() as f64 } else { 1.0 };
            let mut acc = DVector::zeros(agents[0].len());
            for g in agents {
                acc += g;
            }
            parts.extend((acc * scale).iter().copied());
        }
        DVector::from_vec(parts)
    }
}

/// `L` = largest per-agent Jacobian norm; `μ₁`, `μ₂` = smallest eigenvalue of
/// the symmetric part of the averaged and summed reduced Jacobians.
pub fn derive_quadratic_constants(
    cluster_sizes: &[usize],
    strategy_dims: &[usize],
    objective: &dyn LocalObjective,
) -> Result<RegularityConstants> {
    let probe = probe_affine(cluster_sizes, strategy_dims, objective)?;
    let lipschitz = probe
        .jacobians
        .iter()
        .flatten()
        .map(spectral_norm)
        .fold(0.0, f64::max);
    Ok(RegularityConstants {
        lipschitz,
        mu1: min_symmetric_eigenvalue(&probe.reduced_jacobian(true)),
        mu2: min_symmetric_eigenvalue(&probe.reduced_jacobian(false)),
    })
}

/// Cost and price coefficients of the Cournot benchmark.
///
/// Agent `j` of cluster `k` (one-based) pays `c = a x² + b k x + c₀ k` and sells
/// at `p = P k − Σ_h a₀^{kh} x_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CournotParams {
    pub clusters: usize,
    pub agents_per_cluster: usize,
    pub cost_quadratic: f64,
    pub cost_linear: f64,
    pub cost_fixed: f64,
    pub price_intercept: f64,
}

impl Default for CournotParams {
    fn default() -> Self {
        Self {
            clusters: 5,
            agents_per_cluster: 20,
            cost_quadratic: 5.0,
            cost_linear: 5.0,
            cost_fixed: 1.0,
            price_intercept: 60.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CournotObjective {
    params: CournotParams,
    inter_weights: DMatrix<f64>,
}

impl LocalObjective for CournotObjective {
    fn gradient(&self, cluster: usize, _agent: usize, point: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let k = (cluster + 1) as f64;
        let x = point[cluster];
        let w = &self.inter_weights;
        let mut cross = 0.0;
        for (h, &xh) in point.iter().enumerate() {
            if h != cluster {
                cross += w[(cluster, h)] * xh;
            }
        }
        out[0] = 2.0 * p.cost_quadratic * x + p.cost_linear * k - p.price_intercept * k
            + 2.0 * w[(cluster, cluster)] * x
            + cross;
    }

    fn payoff(&self, cluster: usize, _agent: usize, point: &[f64]) -> Option<f64> {
        let p = &self.params;
        let k = (cluster + 1) as f64;
        let x = point[cluster];
        let supply: f64 = point
            .iter()
            .enumerate()
            .map(|(h, &xh)| self.inter_weights[(cluster, h)] * xh)
            .sum();
        let cost = p.cost_quadratic * x * x + p.cost_linear * k * x + p.cost_fixed * k;
        let price = p.price_intercept * k - supply;
        Some(cost - x * price)
    }
}

/// Cournot competition between `clusters` firms, each split into
/// `agents_per_cluster` subsidiaries with scalar production quantities.
///
/// The own-cluster price term uses the agent's own quantity.
pub fn build_cournot(params: CournotParams, inter: &GraphTopology) -> Result<ClusterGameSpec> {
    if params.clusters == 0 || params.agents_per_cluster == 0 {
        return Err(domain("Cournot game needs at least one cluster and one agent"));
    }
    if inter.vertex_count() != params.clusters {
        return Err(domain(format!(
            "inter-cluster graph has {} vertices, Cournot game has {} clusters",
            inter.vertex_count(),
            params.clusters
        )));
    }
    let objective = Arc::new(CournotObjective {
        params,
        inter_weights: inter.weights().clone(),
    });
    ClusterGameSpec::with_derived_constants(
        vec![params.agents_per_cluster; params.clusters],
        vec![1; params.clusters],
        objective,
    )
}

/// Gradients `∇ᵢf_ij(y) = J_ij y + b_ij`.
#[derive(Debug, Clone)]
pub struct AffineObjective {
    jacobians: Vec<Vec<DMatrix<f64>>>,
    offsets: Vec<Vec<DVector<f64>>>,
}

impl AffineObjective {
    pub fn new(jacobians: Vec<Vec<DMatrix<f64>>>, offsets: Vec<Vec<DVector<f64>>>) -> Result<Self> {
        if jacobians.len() != offsets.len() || jacobians.is_empty() {
            return Err(domain("jacobians and offsets must cover the same clusters"));
        }
        let q = jacobians[0].first().map(|j| j.ncols()).unwrap_or(0);
        for (ji, bi) in jacobians.iter().zip(&offsets) {
            if ji.len() != bi.len() || ji.is_empty() {
                return Err(domain("every cluster needs one jacobian and one offset per agent"));
            }
            let qi = ji[0].nrows();
            for (j, b) in ji.iter().zip(bi) {
                if j.nrows() != qi || j.ncols() != q || b.len() != qi {
                    return Err(domain("inconsistent affine gradient shapes"));
                }
            }
        }
        Ok(Self { jacobians, offsets })
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.jacobians.iter().map(Vec::len).collect()
    }

    pub fn strategy_dims(&self) -> Vec<usize> {
        self.jacobians.iter().map(|j| j[0].nrows()).collect()
    }

    /// Builds the spec with probed constants.
    pub fn into_spec(self) -> Result<ClusterGameSpec> {
        let (sizes, dims) = (self.cluster_sizes(), self.strategy_dims());
        ClusterGameSpec::with_derived_constants(sizes, dims, Arc::new(self))
    }
}

impl LocalObjective for AffineObjective {
    fn gradient(&self, cluster: usize, agent: usize, point: &[f64], out: &mut [f64]) {
        let jac = &self.jacobians[cluster][agent];
        let b = &self.offsets[cluster][agent];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = b[r];
            for (c, &p) in point.iter().enumerate() {
                acc += jac[(r, c)] * p;
            }
            *o = acc;
        }
    }
}

/// `f_ij = ½‖x_ij‖²`, so every gradient is the agent's own strategy.
pub fn quadratic_identity(cluster_sizes: &[usize], strategy_dims: &[usize]) -> Result<AffineObjective> {
    check_shape(cluster_sizes, strategy_dims)?;
    let q: usize = strategy_dims.iter().sum();
    let mut jac = Vec::new();
    let mut off = Vec::new();
    let mut col = 0;
    for (&ni, &qi) in cluster_sizes.iter().zip(strategy_dims) {
        let mut j = DMatrix::zeros(qi, q);
        j.view_mut((0, col), (qi, qi)).fill_with_identity();
        jac.push(vec![j; ni]);
        off.push(vec![DVector::zeros(qi); ni]);
        col += qi;
    }
    AffineObjective::new(jac, off)
}

/// Options for [`random_monotone_game`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGameOptions {
    /// Ratio of the diagonal of `D` to its off-diagonal row sum (> 1).
    pub dominance: f64,
    /// Scale of the skew part `S`.
    pub skew_scale: f64,
    /// Scale of per-agent perturbations that cancel within each cluster.
    pub heterogeneity: f64,
}

impl Default for RandomGameOptions {
    fn default() -> Self {
        Self {
            dominance: 2.0,
            skew_scale: 1.0,
            heterogeneity: 0.5,
        }
    }
}

/// Random affine game whose cluster-averaged map has Jacobian `D + S`, with
/// `D` symmetric, positive diagonal and strictly diagonally dominant, and `S`
/// skew-symmetric. Individual agents get perturbations that sum to zero
/// within each cluster, so the averaged map is exactly `(D + S) y + c`.
pub fn random_monotone_game<R: Rng + ?Sized>(
    cluster_sizes: &[usize],
    strategy_dims: &[usize],
    options: RandomGameOptions,
    rng: &mut R,
) -> Result<AffineObjective> {
    check_shape(cluster_sizes, strategy_dims)?;
    if options.dominance <= 1.0 {
        return Err(domain("dominance ratio must exceed 1"));
    }
    let q: usize = strategy_dims.iter().sum();
    let mut d = DMatrix::<f64>::zeros(q, q);
    for r in 0..q {
        for c in r + 1..q {
            let v = rng.random_range(-1.0..1.0);
            d[(r, c)] = v;
            d[(c, r)] = v;
        }
    }
    for r in 0..q {
        let off: f64 = (0..q).filter(|&c| c != r).map(|c| d[(r, c)].abs()).sum();
        d[(r, r)] = options.dominance * off.max(0.5) + rng.random_range(0.0..1.0);
    }
    let mut s = DMatrix::zeros(q, q);
    for r in 0..q {
        for c in r + 1..q {
            let v = options.skew_scale * rng.random_range(-1.0..1.0);
            s[(r, c)] = v;
            s[(c, r)] = -v;
        }
    }
    let mean_jac = d + s;
    let mean_off = DVector::from_fn(q, |_, _| rng.random_range(-5.0..5.0));

    let mut jacobians = Vec::new();
    let mut offsets = Vec::new();
    let mut row = 0;
    for (&ni, &qi) in cluster_sizes.iter().zip(strategy_dims) {
        let base_j = mean_jac.rows(row, qi).into_owned();
        let base_b = mean_off.rows(row, qi).into_owned();
        let mut pj: Vec<DMatrix<f64>> = (0..ni)
            .map(|_| DMatrix::from_fn(qi, q, |_, _| options.heterogeneity * rng.random_range(-1.0..1.0)))
            .collect();
        let mut pb: Vec<DVector<f64>> = (0..ni)
            .map(|_| DVector::from_fn(qi, |_, _| options.heterogeneity * rng.random_range(-1.0..1.0)))
            .collect();
        let mj = pj.iter().fold(DMatrix::zeros(qi, q), |a, b| a + b) / ni as f64;
        let mb = pb.iter().fold(DVector::zeros(qi), |a, b| a + b) / ni as f64;
        for (j, b) in pj.iter_mut().zip(pb.iter_mut()) {
            *j = &base_j + &*j - &mj;
            *b = &base_b + &*b - &mb;
        }
        jacobians.push(pj);
        offsets.push(pb);
        row += qi;
    }
    AffineObjective::new(jacobians, offsets)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ZeroGame;
    impl LocalObjective for ZeroGame {
        fn gradient(&self, _: usize, _: usize, _: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
    }

    struct CubicGame;
    impl LocalObjective for CubicGame {
        fn gradient(&self, _: usize, _: usize, p: &[f64], out: &mut [f64]) {
            out[0] = p[0] * p[0] * p[0];
        }
    }

    fn cournot() -> ClusterGameSpec {
        build_cournot(CournotParams::default(), &GraphTopology::uniform_complete(5).unwrap()).unwrap()
    }

    fn unit_constants() -> RegularityConstants {
        RegularityConstants { lipschitz: 1.0, mu1: 1.0, mu2: 1.0 }
    }

    #[test]
    fn cournot_gradient_at_zero() {
        let g = cournot();
        let zero = vec![0.0; 5];
        assert_eq!(eval_local_gradient(&g, 0, 0, &[0.0], &zero).unwrap(), vec![-55.0]);
        for i in 0..5 {
            assert_eq!(g.gradient(i, 7, &zero)[0], -55.0 * (i + 1) as f64);
        }
    }

    #[test]
    fn cournot_gradient_at_ones() {
        let g = cournot();
        let v = eval_local_gradient(&g, 0, 0, &[1.0], &[1.0; 5]).unwrap()[0];
        assert!((v - (-43.8)).abs() < 1e-12);
    }

    #[test]
    fn eval_rejects_bad_input() {
        let g = cournot();
        assert!(eval_local_gradient(&g, 5, 0, &[0.0], &[0.0; 5]).is_err());
        assert!(eval_local_gradient(&g, 0, 20, &[0.0], &[0.0; 5]).is_err());
        assert!(eval_local_gradient(&g, 0, 0, &[0.0, 1.0], &[0.0; 5]).is_err());
        assert!(eval_local_gradient(&g, 0, 0, &[0.0], &[0.0; 4]).is_err());
        assert!(eval_local_gradient(&g, 1, 0, &[2.0], &[0.0; 5]).is_err());
    }

    #[test]
    fn cournot_residual_at_zero() {
        let g = cournot();
        let r = ne_residual(&g, &ConsensualPoint::zeros(&g));
        let expect = 20.0 * 55.0 * 55f64.sqrt();
        assert!((r - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn cournot_constants() {
        let c = cournot().constants();
        // averaged Jacobian 10.2 I + 0.2 𝟏𝟏ᵀ; summed is 20x that
        assert!((c.mu1 - 10.2).abs() < 1e-10, "mu1 = {}", c.mu1);
        assert!((c.mu2 - 204.0).abs() < 1e-9, "mu2 = {}", c.mu2);
        // per-agent Jacobian row [10.4, .2, .2, .2, .2]
        assert!((c.lipschitz - 108.32f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn cournot_requires_matching_inter_graph() {
        let g4 = GraphTopology::uniform_complete(4).unwrap();
        assert!(matches!(build_cournot(CournotParams::default(), &g4), Err(Error::Domain(_))));
    }

    #[test]
    fn identity_game_constants_and_mapping() {
        let obj = quadratic_identity(&[2, 3], &[1, 2]).unwrap();
        let spec = obj.into_spec().unwrap();
        let c = spec.constants();
        assert!((c.lipschitz - 1.0).abs() < 1e-12);
        assert!((c.mu1 - 1.0).abs() < 1e-12);
        // summed map is diag(nᵢ) I; the smallest block has nᵢ = 2
        assert!((c.mu2 - 2.0).abs() < 1e-12);
        let y = ConsensualPoint::new(&spec, DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        let f = game_mapping(&spec, &y).unwrap();
        assert_eq!(f.as_slice(), &[1.0, 1.0, 2.0, 3.0, 2.0, 3.0, 2.0, 3.0]);
        let point = [4.0, 5.0, 6.0];
        assert_eq!(eval_local_gradient(&spec, 1, 2, &[5.0, 6.0], &point).unwrap(), vec![5.0, 6.0]);
    }

    #[test]
    fn identity_game_with_unit_clusters() {
        let spec = quadratic_identity(&[1, 1], &[1, 1]).unwrap().into_spec().unwrap();
        let c = spec.constants();
        assert_eq!((c.lipschitz, c.mu1, c.mu2), (1.0, 1.0, 1.0));
    }

    #[test]
    fn zero_game_is_flat() {
        let spec = ClusterGameSpec::new(vec![2, 2], vec![1, 1], Arc::new(ZeroGame), unit_constants()).unwrap();
        let y = ConsensualPoint::new(&spec, DVector::from_vec(vec![3.0, -1.0])).unwrap();
        assert_eq!(game_mapping(&spec, &y).unwrap(), DVector::zeros(4));
        assert_eq!(ne_residual(&spec, &y), 0.0);
    }

    #[test]
    fn non_affine_game_is_unsupported() {
        let err = derive_quadratic_constants(&[1], &[1], &CubicGame).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn spec_rejects_bad_shapes_and_constants() {
        let obj: Arc<dyn LocalObjective> = Arc::new(ZeroGame);
        assert!(ClusterGameSpec::new(vec![], vec![], obj.clone(), unit_constants()).is_err());
        assert!(ClusterGameSpec::new(vec![1, 0], vec![1, 1], obj.clone(), unit_constants()).is_err());
        assert!(ClusterGameSpec::new(vec![1], vec![1, 1], obj.clone(), unit_constants()).is_err());
        let bad = RegularityConstants { mu1: 0.0, ..unit_constants() };
        assert!(matches!(
            ClusterGameSpec::new(vec![1], vec![1], obj, bad),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn dimensions_are_consistent() {
        let spec = quadratic_identity(&[3, 1, 2], &[2, 1, 3]).unwrap().into_spec().unwrap();
        assert_eq!(spec.agent_count(), 6);
        assert_eq!(spec.total_dim(), 6);
        assert_eq!(spec.profile_dim(), 3 * 2 + 1 + 2 * 3);
        assert_eq!(spec.block_range(2), 3..6);
    }

    #[test]
    fn random_game_has_prescribed_mean_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let obj = random_monotone_game(&[3, 2], &[2, 1], RandomGameOptions::default(), &mut rng).unwrap();
        let probe = probe_affine(&[3, 2], &[2, 1], &obj).unwrap();
        let j = probe.reduced_jacobian(true);
        // symmetric part is diagonally dominant with a positive diagonal
        let sym = (&j + j.transpose()) * 0.5;
        for r in 0..3 {
            let off: f64 = (0..3).filter(|&c| c != r).map(|c| sym[(r, c)].abs()).sum::<f64>();
            assert!(sym[(r, r)] > off);
        }
        assert!(min_symmetric_eigenvalue(&j) > 0.0);
    }
}
