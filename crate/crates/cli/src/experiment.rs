//! Builds games and topologies from a [`RunConfig`] and runs experiments.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use dgtnash::engine::{ConvergenceTrace, DgtState, Initialization, RunReport, StopCriteria};
use dgtnash::game::{build_cournot, random_monotone_game, ClusterGameSpec, ConsensualPoint};
use dgtnash::oracle::{solve_ne_descent, solve_ne_linear, OracleSolution};
use dgtnash::simnet::spawn_network;
use dgtnash::stepsize::{step_bound, StepBound};
use dgtnash::topology::{compose_adjacency, metropolis_weights, parse_edge_list, CompositeMixing, GraphTopology};
use dgtnash::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{GameConfig, GraphSpec, RunConfig, StepSize};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Engine,
    Simnet,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Self::Engine => "engine",
            Self::Simnet => "simnet",
        }
    }
}

pub struct Setup {
    pub game: ClusterGameSpec,
    pub mixing: CompositeMixing,
}

fn build_graph(spec: &GraphSpec, n: usize, base: &Path) -> Result<GraphTopology, CliError> {
    match spec {
        GraphSpec::CompleteUniform => Ok(GraphTopology::uniform_complete(n)?),
        GraphSpec::Family(kind) => Ok(kind.metropolis(n)?),
        GraphSpec::EdgeList(rel) => {
            let path = base.join(rel);
            let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            let edges = parse_edge_list(&text).map_err(|e| edge_error(&path, e))?;
            metropolis_weights(n, edges).map_err(|e| edge_error(&path, e))
        }
    }
}

fn edge_error(path: &Path, e: Error) -> CliError {
    let line = match &e {
        Error::Parse { line, .. } => Some(*line),
        _ => None,
    };
    let message = match e {
        Error::Parse { message, .. } => message,
        other => other.to_string(),
    };
    CliError::Config {
        path: path.to_path_buf(),
        line,
        message,
    }
}

/// Constructs the inter-cluster graph, every intra-cluster graph, the game
/// and the composite mixing matrix.
pub fn build(config: &RunConfig) -> Result<Setup, CliError> {
    let sizes = config.game.cluster_sizes();
    let base = &config.base_dir;
    let inter = build_graph(&config.topology.inter, sizes.len(), base)?;
    let intra = config
        .topology
        .intra
        .iter()
        .zip(&sizes)
        .map(|(spec, &n)| build_graph(spec, n, base))
        .collect::<Result<Vec<_>, _>>()?;
    let game = match &config.game {
        GameConfig::Cournot { .. } => {
            build_cournot(config.game.cournot_params().expect("cournot variant"), &inter)?
        }
        GameConfig::QuadraticRandom {
            cluster_sizes,
            strategy_dims,
            seed,
            ..
        } => {
            let dims = strategy_dims.clone().unwrap_or_else(|| vec![1; cluster_sizes.len()]);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let options = config.game.random_options().expect("random variant");
            random_monotone_game(cluster_sizes, &dims, options, &mut rng)?.into_spec()?
        }
    };
    let mixing = compose_adjacency(inter, intra)?;
    Ok(Setup { game, mixing })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub sigma: f64,
    pub sigma_max: f64,
    pub alpha_star: f64,
    pub radicand_bound: f64,
    pub max_step: f64,
    pub rho_at_half_bound: f64,
}

impl From<StepBound> for BoundReport {
    fn from(b: StepBound) -> Self {
        Self {
            sigma: b.sigma,
            sigma_max: b.sigma_max,
            alpha_star: b.alpha_star.value,
            radicand_bound: b.radicand_bound,
            max_step: b.max_step,
            rho_at_half_bound: b.rho_at_half_bound,
        }
    }
}

pub fn compute_bound(setup: &Setup) -> Result<BoundReport, CliError> {
    Ok(step_bound(&setup.mixing, &setup.game)?.into())
}

#[derive(Debug, Clone, Serialize)]
pub struct NeReport {
    /// Strategy blocks, one per cluster.
    pub clusters: Vec<Vec<f64>>,
    pub residual: f64,
    pub method: &'static str,
}

fn blocks(game: &ClusterGameSpec, point: &ConsensualPoint) -> Vec<Vec<f64>> {
    (0..game.cluster_count()).map(|i| point.block(game, i)).collect()
}

pub fn solve_ne(setup: &Setup, descent: bool) -> Result<NeReport, CliError> {
    let sol: OracleSolution = if descent {
        solve_ne_descent(&setup.game, None, 1e-10, 1_000_000)?
    } else {
        solve_ne_linear(&setup.game)?
    };
    Ok(NeReport {
        clusters: blocks(&setup.game, &sol.point),
        residual: sol.residual,
        method: sol.method.as_str(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TopologyReport {
    pub clusters: usize,
    pub agents: usize,
    pub cluster_sizes: Vec<usize>,
    pub sigma: f64,
    pub cluster_sigmas: Vec<f64>,
    pub pi_representative: f64,
    pub pi_member: f64,
}

pub fn validate_topology(setup: &Setup) -> TopologyReport {
    let mx = &setup.mixing;
    TopologyReport {
        clusters: mx.cluster_count(),
        agents: mx.agent_count(),
        cluster_sizes: mx.cluster_sizes().to_vec(),
        sigma: mx.sigma(),
        cluster_sigmas: mx.cluster_sigmas().to_vec(),
        pi_representative: mx.pi_max(),
        pi_member: mx.pi_min(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
    Diverged,
}

/// JSON report written after every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub mode: &'static str,
    pub ne: Vec<f64>,
    pub dgt_final: Vec<f64>,
    pub max_abs_error: f64,
    pub empirical_rate: Option<f64>,
    pub alpha_used: f64,
    pub alpha_star: Option<f64>,
    pub max_step: Option<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub trace: PathBuf,
    pub error: Option<String>,
}

fn resolve_output(out_dir: Option<&Path>, p: &Path) -> PathBuf {
    match out_dir {
        Some(d) if p.is_relative() => d.join(p),
        _ => p.to_path_buf(),
    }
}

fn write_trace(path: &Path, trace: &ConvergenceTrace) -> Result<(), CliError> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    trace.write_csv(BufWriter::new(file)).map_err(wrap)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the configured experiment, writes the trace CSV and the JSON report.
///
/// Divergence is not an `Err`: it is recorded in the report with status
/// `diverged` so the files are still written.
pub fn run_experiment(config: &RunConfig, mode: Mode, out_dir: Option<&Path>) -> Result<RunSummary, CliError> {
    let setup = build(config)?;
    let (game, mixing) = (&setup.game, &setup.mixing);
    let bound = step_bound(mixing, game);
    let alpha = match config.algorithm.alpha {
        StepSize::Fixed(a) => a,
        StepSize::Auto => 0.5 * bound.clone()?.max_step,
    };
    if let Err(e) = &bound {
        log::warn!("step-size bound unavailable: {e}");
    }
    let bound = bound.ok();
    let ne = solve_ne_linear(game)?.point;

    let [low, high] = config.algorithm.init;
    let init = Initialization::Seeded {
        seed: config.algorithm.seed,
        low,
        high,
    };
    let stop = StopCriteria {
        max_iters: config.algorithm.max_iters,
        residual_tol: config.algorithm.residual_tol,
    };
    let (outcome, trace, dgt_final): (Result<RunReport, Error>, ConvergenceTrace, ConsensualPoint) = match mode {
        Mode::Engine => {
            let mut state = DgtState::init(game, mixing, init, Some(ne.clone()))?;
            let r = state.run(alpha, stop);
            (r, state.trace().clone(), state.average_point())
        }
        Mode::Simnet => {
            let mut net = spawn_network(game, mixing, init, Some(ne.clone()))?;
            let r = net.run(alpha, stop);
            (r, net.trace().clone(), net.average_point())
        }
    };

    let trace_path = resolve_output(out_dir, &config.output.trace);
    let report_path = resolve_output(out_dir, &config.output.report);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    write_trace(&trace_path, &trace)?;

    let iterations = trace.len() - 1;
    let final_residual = trace.last().map_or(f64::NAN, |r| r.ne_residual);
    let (status, error, empirical_rate) = match &outcome {
        Ok(r) if r.converged => (RunStatus::Converged, None, r.empirical_rate),
        Ok(r) => (RunStatus::MaxIters, None, r.empirical_rate),
        Err(e @ Error::Divergence { .. }) => (RunStatus::Diverged, Some(e.to_string()), None),
        Err(e) => return Err(e.clone().into()),
    };
    let max_abs_error = (dgt_final.as_vector() - ne.as_vector()).amax();
    let summary = RunSummary {
        status,
        mode: mode.as_str(),
        ne: ne.as_slice().to_vec(),
        dgt_final: dgt_final.as_slice().to_vec(),
        max_abs_error,
        empirical_rate,
        alpha_used: alpha,
        alpha_star: bound.as_ref().map(|b| b.alpha_star.value),
        max_step: bound.as_ref().map(|b| b.max_step),
        iterations,
        final_residual,
        trace: trace_path,
        error,
    };
    write_json(&report_path, &summary)?;
    Ok(summary)
}
