//! The gradient-tracking iteration, in compact matrix form and agent by agent.
//!
//! Row `offset[i] + j` of the estimate matrix is agent `(i, j)`'s stacked
//! estimate of every cluster's representative strategy; its block `i` is the
//! agent's own strategy. Trackers follow the cluster-average gradient.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::game::{ClusterGameSpec, ConsensualPoint};
use crate::topology::CompositeMixing;

/// A residual above this is treated as divergence.
pub const DIVERGENCE_RESIDUAL: f64 = 1e12;

/// Stacked estimates, `n x q`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateMatrix(DMatrix<f64>);

impl EstimateMatrix {
    pub fn new(spec: &ClusterGameSpec, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != spec.agent_count() || data.ncols() != spec.total_dim() {
            return Err(domain(format!(
                "estimate matrix is {}x{}, game needs {}x{}",
                data.nrows(),
                data.ncols(),
                spec.agent_count(),
                spec.total_dim()
            )));
        }
        Ok(Self(data))
    }

    /// Every agent holds the same stacked point.
    pub fn consensual(spec: &ClusterGameSpec, point: &ConsensualPoint) -> Self {
        let n = spec.agent_count();
        let y = point.as_vector();
        Self(DMatrix::from_fn(n, y.len(), |_, c| y[c]))
    }

    /// Independent uniform draws in `[low, high)`, filled row by row.
    pub fn seeded(spec: &ClusterGameSpec, seed: u64, low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(domain(format!("initialization box [{low}, {high}] is empty")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, q) = (spec.agent_count(), spec.total_dim());
        let mut data = DMatrix::zeros(n, q);
        for r in 0..n {
            for c in 0..q {
                data[(r, c)] = rng.random_range(low..high);
            }
        }
        Ok(Self(data))
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.0.row(r).iter().copied().collect()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Per-cluster tracker matrices, block `i` of shape `nᵢ x qᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerBlocks {
    blocks: Vec<DMatrix<f64>>,
}

impl TrackerBlocks {
    pub(crate) fn from_blocks(blocks: Vec<DMatrix<f64>>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, cluster: usize) -> &DMatrix<f64> {
        &self.blocks[cluster]
    }

    pub fn row(&self, cluster: usize, agent: usize) -> Vec<f64> {
        self.blocks[cluster].row(agent).iter().copied().collect()
    }

    /// `𝟏ᵀvᵢ` as a column vector.
    pub fn column_sums(&self, cluster: usize) -> DVector<f64> {
        self.blocks[cluster].row_sum().transpose()
    }

    /// `Σᵢ ‖vᵢ − 𝟏𝟏ᵀvᵢ/nᵢ‖_F`.
    pub fn disagreement(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let mean = b.row_mean();
                let mut acc = 0.0;
                for r in 0..b.nrows() {
                    acc += (b.row(r) - &mean).norm_squared();
                }
                acc.sqrt()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub consensus_gap: f64,
    pub optimality_gap: Option<f64>,
    pub tracker_gap: f64,
    pub ne_residual: f64,
}

/// Least-squares fit of `log(residual)` against the iteration index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: &str = "iter,consensus_gap,optimality_gap,tracker_gap,ne_residual";

impl ConvergenceTrace {
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ne_residual).collect()
    }

    pub(crate) fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    /// Geometric mean of successive residual ratios over the final third.
    pub fn empirical_rate(&self) -> Option<f64> {
        let t = self.records.len().checked_sub(1)?;
        if t < 3 {
            return None;
        }
        let start = 2 * t / 3;
        let (r0, r1) = (self.records[start].ne_residual, self.records[t].ne_residual);
        if !(r0 > 0.0 && r1 > 0.0) {
            return None;
        }
        Some((r1 / r0).powf(1.0 / (t - start) as f64))
    }

    /// Fit over records `⌊skip·T⌋..=T`; `skip = 1/3` keeps the final two-thirds.
    pub fn log_residual_fit(&self, skip: f64) -> Option<LogLinearFit> {
        let t = self.records.len().checked_sub(1)?;
        let start = (skip * t as f64).floor() as usize;
        let pts: Vec<(f64, f64)> = self.records[start..]
            .iter()
            .filter(|r| r.ne_residual > 0.0)
            .map(|r| (r.iter as f64, r.ne_residual.ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
        Some(LogLinearFit { slope, intercept, r_squared })
    }

    /// CSV with [`TRACE_HEADER`]; a missing optimality gap is written as `nan`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            let opt = match r.optimality_gap {
                Some(v) => format!("{v:.16e}"),
                None => "nan".to_string(),
            };
            writeln!(
                w,
                "{},{:.16e},{},{:.16e},{:.16e}",
                r.iter, r.consensus_gap, opt, r.tracker_gap, r.ne_residual
            )?;
        }
        Ok(())
    }
}

/// Starting estimates for [`DgtState::init`].
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    Matrix(EstimateMatrix),
    Seeded { seed: u64, low: f64, high: f64 },
}

impl Initialization {
    pub fn seeded(seed: u64) -> Self {
        Self::Seeded { seed, low: 0.0, high: 1.0 }
    }

    /// The starting matrix, checked against the game.
    pub fn resolve(self, game: &ClusterGameSpec) -> Result<EstimateMatrix> {
        let x = match self {
            Self::Matrix(m) => EstimateMatrix::new(game, m.into_inner())?,
            Self::Seeded { seed, low, high } => EstimateMatrix::seeded(game, seed, low, high)?,
        };
        if !x.0.iter().all(|v| v.is_finite()) {
            return Err(domain("initial estimates contain non-finite values"));
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    pub max_iters: usize,
    pub residual_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunReport {
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub empirical_rate: Option<f64>,
}

/// Neighbor lists with weights, in ascending neighbor order including self.
#[derive(Debug, Clone)]
pub(crate) struct Wiring {
    /// `[cluster][agent]` → `(agent l, a_i^{jl})`.
    pub intra: Vec<Vec<Vec<(usize, f64)>>>,
    /// `[cluster]` → `(cluster h, a₀^{ih})`.
    pub inter: Vec<Vec<(usize, f64)>>,
}

impl Wiring {
    pub fn new(mixing: &CompositeMixing) -> Self {
        let m = mixing.cluster_count();
        let intra = (0..m)
            .map(|i| {
                let g = mixing.intra(i);
                (0..g.vertex_count())
                    .map(|j| g.support(j).into_iter().map(|l| (l, g.weight(j, l))).collect())
                    .collect()
            })
            .collect();
        let g0 = mixing.inter();
        let inter = (0..m)
            .map(|i| g0.support(i).into_iter().map(|h| (h, g0.weight(i, h))).collect())
            .collect();
        Self { intra, inter }
    }
}

/// New stacked estimate of one agent from its neighbors' rows.
///
/// Representatives pass their inter-cluster reads (other representatives'
/// rows); everyone else passes `None`.
pub(crate) fn mix_estimate(intra: &[(f64, &[f64])], inter: Option<&[(f64, &[f64])]>, out: &mut [f64]) {
    for (c, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (w, row) in intra {
            s += w * row[c];
        }
        *o = match inter {
            None => s,
            Some(reps) => {
                let mut t = 0.0;
                for (w, row) in reps {
                    t += w * row[c];
                }
                0.5 * s + 0.5 * t
            }
        };
    }
}

/// `Σₗ a^{jl} v_l + g_new − g_old`.
pub(crate) fn mix_tracker(intra: &[(f64, &[f64])], g_new: &[f64], g_old: &[f64], out: &mut [f64]) {
    for (c, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (w, row) in intra {
            s += w * row[c];
        }
        *o = s + g_new[c] - g_old[c];
    }
}

/// Mutable iteration state, borrowing the game and the mixing matrix.
#[derive(Debug, Clone)]
pub struct DgtState<'a> {
    game: &'a ClusterGameSpec,
    mixing: &'a CompositeMixing,
    wiring: Wiring,
    x: DMatrix<f64>,
    trackers: TrackerBlocks,
    grads: Vec<DMatrix<f64>>,
    reference: Option<ConsensualPoint>,
    iteration: usize,
    trace: ConvergenceTrace,
}

pub(crate) fn check_compatible(
    game: &ClusterGameSpec,
    mixing: &CompositeMixing,
    reference: Option<&ConsensualPoint>,
) -> Result<()> {
    if game.cluster_sizes() != mixing.cluster_sizes() {
        return Err(domain(format!(
            "game has cluster sizes {:?}, mixing matrix has {:?}",
            game.cluster_sizes(),
            mixing.cluster_sizes()
        )));
    }
    if reference.is_some_and(|r| r.as_vector().len() != game.total_dim()) {
        return Err(domain("reference point does not match the game"));
    }
    Ok(())
}

pub(crate) fn check_run_args(alpha: f64, stop: StopCriteria) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(domain(format!("step size {alpha} must be positive")));
    }
    if stop.residual_tol.is_nan() || stop.residual_tol < 0.0 {
        return Err(domain("residual tolerance must be nonnegative"));
    }
    Ok(())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(domain(format!("step size {alpha} must be finite and nonnegative")));
    }
    Ok(())
}

impl<'a> DgtState<'a> {
    pub fn init(
        game: &'a ClusterGameSpec,
        mixing: &'a CompositeMixing,
        init: Initialization,
        reference: Option<ConsensualPoint>,
    ) -> Result<Self> {
        check_compatible(game, mixing, reference.as_ref())?;
        let x = init.resolve(game)?.into_inner();
        let grads = stacked_gradients(game, mixing, &x);
        let mut state = Self {
            game,
            mixing,
            wiring: Wiring::new(mixing),
            x,
            trackers: TrackerBlocks { blocks: grads.clone() },
            grads,
            reference,
            iteration: 0,
            trace: ConvergenceTrace::default(),
        };
        let rec = state.record();
        state.trace.push(rec);
        Ok(state)
    }

    pub fn game(&self) -> &'a ClusterGameSpec {
        self.game
    }

    pub fn mixing(&self) -> &'a CompositeMixing {
        self.mixing
    }

    pub fn estimates(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn trackers(&self) -> &TrackerBlocks {
        &self.trackers
    }

    /// `Gᵢ` at the current estimates, per cluster.
    pub fn gradients(&self) -> &[DMatrix<f64>] {
        &self.grads
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }

    pub fn reference(&self) -> Option<&ConsensualPoint> {
        self.reference.as_ref()
    }

    /// `x̄_π = (πᵀx)ᵀ`.
    pub fn average_point(&self) -> ConsensualPoint {
        let avg = (self.mixing.pi().transpose() * &self.x).transpose();
        ConsensualPoint::new(self.game, avg).expect("dimensions checked at init")
    }

    /// Own strategies `x_{i0}` of the representatives, stacked.
    pub fn representative_point(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.game.total_dim());
        for i in 0..self.game.cluster_count() {
            let r = self.mixing.offsets()[i];
            for k in self.game.block_range(i) {
                out[k] = self.x[(r, k)];
            }
        }
        out
    }

    /// Largest distance between two rows of the same cluster.
    pub fn max_cluster_disagreement(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &size) in self.game.cluster_sizes().iter().enumerate() {
            let o = self.mixing.offsets()[i];
            for a in 0..size {
                for b in a + 1..size {
                    worst = worst.max((self.x.row(o + a) - self.x.row(o + b)).norm());
                }
            }
        }
        worst
    }

    /// Largest relative violation of `𝟏ᵀvᵢ = Σⱼ ∇ᵢf_ij(row (i,j))`, with fresh
    /// gradient evaluations.
    pub fn conservation_residual(&self) -> f64 {
        let fresh = stacked_gradients(self.game, self.mixing, &self.x);
        let mut worst: f64 = 0.0;
        for (i, g) in fresh.iter().enumerate() {
            let v = self.trackers.block(i);
            let diff = (v.row_sum() - g.row_sum()).norm();
            worst = worst.max(diff / (1.0 + v.norm()));
        }
        worst
    }

    /// `ξ = (‖x − 𝒜_∞x‖_F^π, ‖𝒜_∞x − 𝟏x*ᵀ‖_F, Σᵢ‖vᵢ − v̄ᵢ‖_F)`.
    pub fn xi_metrics(&self, x_star: &ConsensualPoint) -> Result<[f64; 3]> {
        xi_metrics(self.game, self.mixing, &self.x, &self.trackers, x_star)
    }

    fn record(&self) -> TraceRecord {
        trace_record(self.game, self.mixing, &self.x, &self.trackers, self.reference.as_ref(), self.iteration)
    }

    fn commit(&mut self, x: DMatrix<f64>, blocks: Vec<DMatrix<f64>>, grads: Vec<DMatrix<f64>>) -> Result<()> {
        check_finite(&x, &blocks, self.iteration + 1)?;
        self.x = x;
        self.trackers.blocks = blocks;
        self.grads = grads;
        self.iteration += 1;
        let rec = self.record();
        check_residual(&rec)?;
        self.trace.push(rec);
        Ok(())
    }

    /// `x⁺ = 𝒜x − αV`, `vᵢ⁺ = Aᵢvᵢ + Gᵢ(x⁺) − Gᵢ(x)`.
    pub fn step_compact(&mut self, alpha: f64) -> Result<()> {
        check_alpha(alpha)?;
        let mut x = self.mixing.matrix() * &self.x;
        for i in 0..self.game.cluster_count() {
            let o = self.mixing.offsets()[i];
            let v = self.trackers.block(i);
            for (c, k) in self.game.block_range(i).enumerate() {
                for j in 0..v.nrows() {
                    x[(o + j, k)] -= alpha * v[(j, c)];
                }
            }
        }
        let grads = stacked_gradients(self.game, self.mixing, &x);
        let blocks = (0..self.game.cluster_count())
            .map(|i| {
                self.mixing.intra(i).weights() * self.trackers.block(i) + &grads[i] - &self.grads[i]
            })
            .collect();
        self.commit(x, blocks, grads)
    }

    /// The same update computed agent by agent from neighbor rows only.
    pub fn step_agentwise(&mut self, alpha: f64) -> Result<()> {
        check_alpha(alpha)?;
        let (n, q) = self.x.shape();
        let rows: Vec<Vec<f64>> = (0..n).map(|r| self.x.row(r).iter().copied().collect()).collect();
        let offsets = self.mixing.offsets();
        let mut x = DMatrix::zeros(n, q);
        let mut buf = vec![0.0; q];
        for i in 0..self.game.cluster_count() {
            let range = self.game.block_range(i);
            let v = self.trackers.block(i);
            for j in 0..self.game.cluster_sizes()[i] {
                let intra: Vec<(f64, &[f64])> = self.wiring.intra[i][j]
                    .iter()
                    .map(|&(l, w)| (w, rows[offsets[i] + l].as_slice()))
                    .collect();
                let inter: Option<Vec<(f64, &[f64])>> = (j == 0).then(|| {
                    self.wiring.inter[i]
                        .iter()
                        .map(|&(h, w)| (w, rows[offsets[h]].as_slice()))
                        .collect()
                });
                mix_estimate(&intra, inter.as_deref(), &mut buf);
                for (c, k) in range.clone().enumerate() {
                    buf[k] -= alpha * v[(j, c)];
                }
                for (k, val) in buf.iter().enumerate() {
                    x[(offsets[i] + j, k)] = *val;
                }
            }
        }
        let grads = stacked_gradients(self.game, self.mixing, &x);
        let mut blocks = Vec::with_capacity(self.game.cluster_count());
        for i in 0..self.game.cluster_count() {
            let v = self.trackers.block(i);
            let vrows: Vec<Vec<f64>> = (0..v.nrows()).map(|j| v.row(j).iter().copied().collect()).collect();
            let mut out = DMatrix::zeros(v.nrows(), v.ncols());
            let mut tb = vec![0.0; v.ncols()];
            for j in 0..v.nrows() {
                let intra: Vec<(f64, &[f64])> = self.wiring.intra[i][j]
                    .iter()
                    .map(|&(l, w)| (w, vrows[l].as_slice()))
                    .collect();
                let g_new: Vec<f64> = grads[i].row(j).iter().copied().collect();
                let g_old: Vec<f64> = self.grads[i].row(j).iter().copied().collect();
                mix_tracker(&intra, &g_new, &g_old, &mut tb);
                out.set_row(j, &RowDVector::from_row_slice(&tb));
            }
            blocks.push(out);
        }
        self.commit(x, blocks, grads)
    }

    /// Iterates [`Self::step_compact`] until the residual of `x̄_π` reaches
    /// `residual_tol` or `max_iters` steps have been taken.
    pub fn run(&mut self, alpha: f64, stop: StopCriteria) -> Result<RunReport> {
        check_run_args(alpha, stop)?;
        let start = self.iteration;
        let mut residual = self.trace.last().map_or(f64::INFINITY, |r| r.ne_residual);
        while residual > stop.residual_tol && self.iteration - start < stop.max_iters {
            self.step_compact(alpha)?;
            residual = self.trace.last().expect("record pushed").ne_residual;
        }
        let report = RunReport {
            iterations: self.iteration - start,
            converged: residual <= stop.residual_tol,
            final_residual: residual,
            empirical_rate: self.trace.empirical_rate(),
        };
        log::debug!(
            "run finished after {} iterations, residual {:e}",
            report.iterations,
            report.final_residual
        );
        Ok(report)
    }
}

fn consensus_gap(pi: &DVector<f64>, x: &DMatrix<f64>, avg: &RowDVector<f64>) -> f64 {
    let mut acc = 0.0;
    for r in 0..x.nrows() {
        acc += pi[r] * (x.row(r) - avg).norm_squared();
    }
    acc.sqrt()
}

fn optimality_gap(n: usize, avg: &RowDVector<f64>, x_star: &ConsensualPoint) -> f64 {
    (avg - x_star.as_vector().transpose()).norm() * (n as f64).sqrt()
}

/// `ξ` for an arbitrary estimate matrix and tracker set.
pub fn xi_metrics(
    game: &ClusterGameSpec,
    mixing: &CompositeMixing,
    x: &DMatrix<f64>,
    trackers: &TrackerBlocks,
    x_star: &ConsensualPoint,
) -> Result<[f64; 3]> {
    if x_star.as_vector().len() != game.total_dim() || x.nrows() != mixing.agent_count() {
        return Err(domain("state or reference point does not match the game"));
    }
    let avg = mixing.pi().transpose() * x;
    Ok([
        consensus_gap(mixing.pi(), x, &avg),
        optimality_gap(x.nrows(), &avg, x_star),
        trackers.disagreement(),
    ])
}

pub(crate) fn trace_record(
    game: &ClusterGameSpec,
    mixing: &CompositeMixing,
    x: &DMatrix<f64>,
    trackers: &TrackerBlocks,
    reference: Option<&ConsensualPoint>,
    iter: usize,
) -> TraceRecord {
    let avg = mixing.pi().transpose() * x;
    TraceRecord {
        iter,
        consensus_gap: consensus_gap(mixing.pi(), x, &avg),
        optimality_gap: reference.map(|r| optimality_gap(x.nrows(), &avg, r)),
        tracker_gap: trackers.disagreement(),
        ne_residual: game.cluster_gradient_sums(avg.as_slice()).norm(),
    }
}

pub(crate) fn check_finite(x: &DMatrix<f64>, trackers: &[DMatrix<f64>], iteration: usize) -> Result<()> {
    let finite = x.iter().all(|v| v.is_finite()) && trackers.iter().all(|b| b.iter().all(|v| v.is_finite()));
    if finite {
        Ok(())
    } else {
        Err(Error::Divergence {
            iteration,
            reason: "non-finite estimate or tracker".into(),
        })
    }
}

pub(crate) fn check_residual(record: &TraceRecord) -> Result<()> {
    if record.ne_residual <= DIVERGENCE_RESIDUAL {
        Ok(())
    } else {
        Err(Error::Divergence {
            iteration: record.iter,
            reason: format!("residual {:e} exceeds {DIVERGENCE_RESIDUAL:e}", record.ne_residual),
        })
    }
}

/// `Gᵢ(x)`: row `j` is `∇ᵢf_ij` evaluated at row `(i, j)` of `x`.
pub(crate) fn stacked_gradients(
    game: &ClusterGameSpec,
    mixing: &CompositeMixing,
    x: &DMatrix<f64>,
) -> Vec<DMatrix<f64>> {
    let q = x.ncols();
    let mut point = vec![0.0; q];
    let mut out = Vec::with_capacity(game.cluster_count());
    for i in 0..game.cluster_count() {
        let qi = game.strategy_dims()[i];
        let mut g = DMatrix::zeros(game.cluster_sizes()[i], qi);
        let mut buf = vec![0.0; qi];
        for j in 0..game.cluster_sizes()[i] {
            let r = mixing.offsets()[i] + j;
            for (c, p) in point.iter_mut().enumerate() {
                *p = x[(r, c)];
            }
            game.gradient_into(i, j, &point, &mut buf);
            for (c, v) in buf.iter().enumerate() {
                g[(j, c)] = *v;
            }
        }
        out.push(g);
    }
    out
}
