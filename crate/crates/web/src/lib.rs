//! Browser bindings. Every export takes a JSON object of parameters and
//! returns a JSON string; missing parameters fall back to the Cournot
//! benchmark defaults.

use dgtnash::engine::{DgtState, Initialization};
use dgtnash::game::{build_cournot, ClusterGameSpec, CournotParams};
use dgtnash::oracle::solve_ne_linear;
use dgtnash::stepsize::{alpha_star, gain_constants, phi_matrix, spectral_radius_3x3};
use dgtnash::topology::{compose_adjacency, CompositeMixing, GraphKind, GraphTopology};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Hard caps so a careless input cannot freeze the tab.
const MAX_AGENTS: usize = 400;
const MAX_ITERATIONS: usize = 200_000;
const MAX_SAMPLES: usize = 400;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub clusters: usize,
    pub agents: usize,
    /// ring | path | complete | star
    pub intra: String,
    /// `complete-uniform` or a graph family
    pub inter: String,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            clusters: 5,
            agents: 20,
            intra: "ring".into(),
            inter: "complete-uniform".into(),
        }
    }
}

fn graph(name: &str, n: usize) -> Result<GraphTopology, String> {
    if name == "complete-uniform" {
        return GraphTopology::uniform_complete(n).map_err(|e| e.to_string());
    }
    let kind = GraphKind::parse(name).ok_or_else(|| format!("unknown graph `{name}`"))?;
    kind.metropolis(n).map_err(|e| e.to_string())
}

fn build(p: &NetworkParams) -> Result<(ClusterGameSpec, CompositeMixing), String> {
    if p.clusters == 0 || p.agents == 0 || p.clusters * p.agents > MAX_AGENTS {
        return Err(format!("need 1 to {MAX_AGENTS} agents in total"));
    }
    let inter = graph(&p.inter, p.clusters)?;
    let params = CournotParams {
        clusters: p.clusters,
        agents_per_cluster: p.agents,
        ..CournotParams::default()
    };
    let game = build_cournot(params, &inter).map_err(|e| e.to_string())?;
    let intra = (0..p.clusters)
        .map(|_| graph(&p.intra, p.agents))
        .collect::<Result<Vec<_>, _>>()?;
    let mixing = compose_adjacency(inter, intra).map_err(|e| e.to_string())?;
    Ok((game, mixing))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationParams {
    #[serde(flatten)]
    pub network: NetworkParams,
    pub alpha: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Upper end of the initialization box `[0, init_high]`.
    pub init_high: f64,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            network: NetworkParams::default(),
            alpha: 0.02,
            iterations: 20_000,
            tolerance: 1e-6,
            seed: 1,
            init_high: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub iter: usize,
    pub residual: f64,
    pub consensus_gap: f64,
    pub tracker_gap: f64,
    /// Every cluster's estimate of cluster 0's strategy, averaged per cluster.
    pub estimates_of_first: Vec<f64>,
    /// Own strategy of each representative.
    pub representatives: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    pub ne: Vec<f64>,
    pub final_point: Vec<f64>,
    pub max_abs_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: Option<String>,
    pub empirical_rate: Option<f64>,
    pub samples: Vec<Sample>,
}

fn sample(state: &DgtState) -> Sample {
    let rec = *state.trace().last().expect("trace never empty");
    let x = state.estimates();
    let mixing = state.mixing();
    let estimates_of_first = (0..mixing.cluster_count())
        .map(|i| {
            let o = mixing.offsets()[i];
            let n = mixing.cluster_sizes()[i];
            (0..n).map(|j| x[(o + j, 0)]).sum::<f64>() / n as f64
        })
        .collect();
    Sample {
        iter: rec.iter,
        residual: rec.ne_residual,
        consensus_gap: rec.consensus_gap,
        tracker_gap: rec.tracker_gap,
        estimates_of_first,
        representatives: state.representative_point().as_slice().to_vec(),
    }
}

/// Runs the Cournot benchmark and returns downsampled trajectories.
pub fn simulate(p: &SimulationParams) -> Result<SimulationResult, String> {
    if !(p.alpha.is_finite() && p.alpha > 0.0) {
        return Err("alpha must be positive".into());
    }
    if !(p.init_high.is_finite() && p.init_high > 0.0) {
        return Err("init_high must be positive".into());
    }
    let iterations = p.iterations.min(MAX_ITERATIONS);
    let (game, mixing) = build(&p.network)?;
    let ne = solve_ne_linear(&game).map_err(|e| e.to_string())?.point;
    let init = Initialization::Seeded {
        seed: p.seed,
        low: 0.0,
        high: p.init_high,
    };
    let mut state = DgtState::init(&game, &mixing, init, Some(ne.clone())).map_err(|e| e.to_string())?;
    let every = (iterations / MAX_SAMPLES).max(1);
    let mut samples = vec![sample(&state)];
    let mut diverged = None;
    let mut converged = state.trace().last().is_some_and(|r| r.ne_residual <= p.tolerance);
    while !converged && state.iteration() < iterations {
        if let Err(e) = state.step_compact(p.alpha) {
            diverged = Some(e.to_string());
            break;
        }
        converged = state.trace().last().is_some_and(|r| r.ne_residual <= p.tolerance);
        if state.iteration() % every == 0 || converged {
            samples.push(sample(&state));
        }
    }
    let final_point = state.average_point();
    Ok(SimulationResult {
        max_abs_error: (final_point.as_vector() - ne.as_vector()).amax(),
        ne: ne.as_slice().to_vec(),
        final_point: final_point.as_slice().to_vec(),
        iterations: state.iteration(),
        converged,
        diverged,
        empirical_rate: state.trace().empirical_rate(),
        samples,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainParams {
    #[serde(flatten)]
    pub network: NetworkParams,
    pub points: usize,
}

impl Default for GainParams {
    fn default() -> Self {
        Self {
            network: NetworkParams::default(),
            points: 120,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GainCurve {
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub alpha_star: f64,
    pub radicand_bound: f64,
    pub sigma: f64,
    pub sigma_max: f64,
}

/// `ρ(Φ(α))` on a log grid from `α*/1000` up to the radicand bound.
pub fn gain_curve(p: &GainParams) -> Result<GainCurve, String> {
    let (game, mixing) = build(&p.network)?;
    let c = gain_constants(&mixing, &game).map_err(|e| e.to_string())?;
    let star = alpha_star(&c).map_err(|e| e.to_string())?;
    let bound = c.radicand_bound();
    let points = p.points.clamp(2, 2000);
    let lo = (star.value * 1e-3).ln();
    let hi = bound.ln();
    let alpha: Vec<f64> = (0..points)
        .map(|k| (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp().min(bound))
        .collect();
    let rho = alpha
        .iter()
        .map(|&a| phi_matrix(a, &c).map(|m| spectral_radius_3x3(&m)).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GainCurve {
        alpha,
        rho,
        alpha_star: star.value,
        radicand_bound: bound,
        sigma: c.sigma,
        sigma_max: c.sigma_max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TopologySummary {
    pub agents: usize,
    pub sigma: f64,
    pub cluster_sigmas: Vec<f64>,
    pub pi: Vec<f64>,
    /// Row-major composite matrix.
    pub matrix: Vec<f64>,
}

pub fn topology(p: &NetworkParams) -> Result<TopologySummary, String> {
    let (_, mixing) = build(p)?;
    let a = mixing.matrix();
    let n = a.nrows();
    Ok(TopologySummary {
        agents: n,
        sigma: mixing.sigma(),
        cluster_sigmas: mixing.cluster_sigmas().to_vec(),
        pi: mixing.pi().as_slice().to_vec(),
        matrix: (0..n).flat_map(|r| (0..n).map(move |c| a[(r, c)])).collect(),
    })
}

fn call<P, R>(params: &str, f: impl FnOnce(&P) -> Result<R, String>) -> Result<String, JsValue>
where
    P: for<'de> Deserialize<'de>,
    R: Serialize,
{
    let text = if params.trim().is_empty() { "{}" } else { params };
    let p: P = serde_json::from_str(text).map_err(|e| JsValue::from_str(&format!("bad parameters: {e}")))?;
    let out = f(&p).map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&out).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = simulateCournot)]
pub fn simulate_cournot(params: &str) -> Result<String, JsValue> {
    call(params, simulate)
}

#[wasm_bindgen(js_name = gainCurve)]
pub fn gain_curve_js(params: &str) -> Result<String, JsValue> {
    call(params, gain_curve)
}

#[wasm_bindgen(js_name = topologySummary)]
pub fn topology_summary(params: &str) -> Result<String, JsValue> {
    call(params, topology)
}
