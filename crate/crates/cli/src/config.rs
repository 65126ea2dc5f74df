//! Experiment configuration: a TOML file with `[game]`, `[topology]`,
//! `[algorithm]` and `[output]` tables.
//!
//! ```toml
//! [game]
//! kind = "cournot"            # or "quadratic-random"
//!
//! [topology]
//! inter = "complete-uniform"  # or ring | path | complete | star | edge-list file
//! intra = "ring"
//!
//! [topology.intra_overrides]
//! 2 = "edges/cluster2.txt"    # zero-based cluster index
//!
//! [algorithm]
//! alpha = 0.02                # or "auto" for half the theoretical bound
//! max_iters = 100000
//! residual_tol = 1e-6
//! seed = 1
//! init = [0.0, 1.0]
//!
//! [output]
//! trace = "trace.csv"
//! report = "report.json"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use dgtnash::game::{CournotParams, RandomGameOptions};
use dgtnash::topology::GraphKind;
use serde::de::{self, Deserializer};
use serde::Deserialize;
use toml::Spanned;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub game: GameConfig,
    pub topology: TopologyConfig,
    pub algorithm: AlgorithmConfig,
    pub output: OutputConfig,
    /// Directory of the config file; edge-list paths are resolved against it.
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GameConfig {
    Cournot {
        #[serde(default = "defaults::clusters")]
        clusters: usize,
        #[serde(default = "defaults::agents")]
        agents: usize,
        #[serde(default = "defaults::cost_quadratic")]
        cost_quadratic: f64,
        #[serde(default = "defaults::cost_linear")]
        cost_linear: f64,
        #[serde(default = "defaults::cost_fixed")]
        cost_fixed: f64,
        #[serde(default = "defaults::price_intercept")]
        price_intercept: f64,
    },
    QuadraticRandom {
        cluster_sizes: Vec<usize>,
        /// One per cluster; all ones when omitted.
        strategy_dims: Option<Vec<usize>>,
        #[serde(default)]
        seed: u64,
        #[serde(default = "defaults::dominance")]
        dominance: f64,
        #[serde(default = "defaults::skew_scale")]
        skew_scale: f64,
        #[serde(default = "defaults::heterogeneity")]
        heterogeneity: f64,
    },
}

mod defaults {
    use dgtnash::game::{CournotParams, RandomGameOptions};

    pub fn clusters() -> usize {
        CournotParams::default().clusters
    }
    pub fn agents() -> usize {
        CournotParams::default().agents_per_cluster
    }
    pub fn cost_quadratic() -> f64 {
        CournotParams::default().cost_quadratic
    }
    pub fn cost_linear() -> f64 {
        CournotParams::default().cost_linear
    }
    pub fn cost_fixed() -> f64 {
        CournotParams::default().cost_fixed
    }
    pub fn price_intercept() -> f64 {
        CournotParams::default().price_intercept
    }
    pub fn dominance() -> f64 {
        RandomGameOptions::default().dominance
    }
    pub fn skew_scale() -> f64 {
        RandomGameOptions::default().skew_scale
    }
    pub fn heterogeneity() -> f64 {
        RandomGameOptions::default().heterogeneity
    }
}

impl Default for GameConfig {
    fn default() -> Self {
        let p = CournotParams::default();
        Self::Cournot {
            clusters: p.clusters,
            agents: p.agents_per_cluster,
            cost_quadratic: p.cost_quadratic,
            cost_linear: p.cost_linear,
            cost_fixed: p.cost_fixed,
            price_intercept: p.price_intercept,
        }
    }
}

impl GameConfig {
    pub fn cluster_count(&self) -> usize {
        match self {
            Self::Cournot { clusters, .. } => *clusters,
            Self::QuadraticRandom { cluster_sizes, .. } => cluster_sizes.len(),
        }
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        match self {
            Self::Cournot { clusters, agents, .. } => vec![*agents; *clusters],
            Self::QuadraticRandom { cluster_sizes, .. } => cluster_sizes.clone(),
        }
    }

    pub fn cournot_params(&self) -> Option<CournotParams> {
        match *self {
            Self::Cournot {
                clusters,
                agents,
                cost_quadratic,
                cost_linear,
                cost_fixed,
                price_intercept,
            } => Some(CournotParams {
                clusters,
                agents_per_cluster: agents,
                cost_quadratic,
                cost_linear,
                cost_fixed,
                price_intercept,
            }),
            Self::QuadraticRandom { .. } => None,
        }
    }

    pub fn random_options(&self) -> Option<RandomGameOptions> {
        match *self {
            Self::QuadraticRandom {
                dominance,
                skew_scale,
                heterogeneity,
                ..
            } => Some(RandomGameOptions {
                dominance,
                skew_scale,
                heterogeneity,
            }),
            Self::Cournot { .. } => None,
        }
    }
}

/// A graph named by family or read from an edge-list file.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    /// Complete graph with every weight `1/n`.
    CompleteUniform,
    /// Named family with Metropolis weights.
    Family(GraphKind),
    /// `u v` lines, zero-based vertices, Metropolis weights.
    EdgeList(PathBuf),
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CompleteUniform => f.write_str("complete-uniform"),
            Self::Family(k) => write!(f, "{}", format!("{k:?}").to_lowercase()),
            Self::EdgeList(p) => write!(f, "{}", p.display()),
        }
    }
}

impl<'de> Deserialize<'de> for GraphSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.trim().is_empty() {
            return Err(de::Error::custom("graph must be a family name or an edge-list path"));
        }
        Ok(match s.as_str() {
            "complete-uniform" => Self::CompleteUniform,
            other => match GraphKind::parse(other) {
                Some(k) => Self::Family(k),
                None => Self::EdgeList(PathBuf::from(other)),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    #[serde(default = "default_inter")]
    inter: GraphSpec,
    #[serde(default = "default_intra")]
    intra: GraphSpec,
    #[serde(default)]
    intra_overrides: BTreeMap<String, GraphSpec>,
}

fn default_inter() -> GraphSpec {
    GraphSpec::CompleteUniform
}

fn default_intra() -> GraphSpec {
    GraphSpec::Family(GraphKind::Ring)
}

impl Default for RawTopology {
    fn default() -> Self {
        Self {
            inter: default_inter(),
            intra: default_intra(),
            intra_overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    pub inter: GraphSpec,
    /// One entry per cluster, overrides applied.
    pub intra: Vec<GraphSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// Half of the theoretical maximum step.
    Auto,
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        let v = match Raw::deserialize(d)? {
            Raw::Text(s) if s == "auto" => return Ok(Self::Auto),
            Raw::Text(s) => return Err(de::Error::custom(format!("alpha must be a number or \"auto\", found \"{s}\""))),
            Raw::Num(v) => v,
            Raw::Int(v) => v as f64,
        };
        if v.is_finite() && v > 0.0 {
            Ok(Self::Fixed(v))
        } else {
            Err(de::Error::custom(format!("alpha must be positive, found {v}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub alpha: StepSize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub residual_tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Box `[low, high]` for the random initial estimates.
    #[serde(default = "default_init")]
    pub init: [f64; 2],
}

fn default_max_iters() -> usize {
    100_000
}

fn default_tol() -> f64 {
    1e-6
}

fn default_init() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_trace")]
    pub trace: PathBuf,
    #[serde(default = "default_report")]
    pub report: PathBuf,
}

fn default_trace() -> PathBuf {
    PathBuf::from("trace.csv")
}

fn default_report() -> PathBuf {
    PathBuf::from("report.json")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trace: default_trace(),
            report: default_report(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    game: GameConfig,
    topology: Option<Spanned<RawTopology>>,
    algorithm: Spanned<AlgorithmConfig>,
    #[serde(default)]
    output: OutputConfig,
}

/// One-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig, CliError> {
    let fail = |line: Option<usize>, message: String| CliError::Config {
        path: path.to_path_buf(),
        line,
        message,
    };
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        fail(line, e.message().to_string())
    })?;

    let topo_line = raw.topology.as_ref().map(|t| line_of(text, t.span().start));
    let algo_line = Some(line_of(text, raw.algorithm.span().start));
    let m = raw.game.cluster_count();
    let sizes = raw.game.cluster_sizes();
    if m == 0 || sizes.contains(&0) {
        return Err(fail(None, "every game needs at least one cluster and one agent per cluster".into()));
    }
    if let GameConfig::QuadraticRandom {
        strategy_dims: Some(d), ..
    } = &raw.game
    {
        if d.len() != m || d.contains(&0) {
            return Err(fail(None, format!("strategy_dims needs {m} positive entries")));
        }
    }

    let topo = raw.topology.map(Spanned::into_inner).unwrap_or_default();
    let mut intra = vec![topo.intra.clone(); m];
    for (key, spec) in topo.intra_overrides {
        let idx: usize = key
            .parse()
            .map_err(|_| fail(topo_line, format!("intra_overrides key `{key}` is not a cluster index")))?;
        if idx >= m {
            return Err(fail(topo_line, format!("intra_overrides names cluster {idx}, game has {m}")));
        }
        intra[idx] = spec;
    }

    let algorithm = raw.algorithm.into_inner();
    let [lo, hi] = algorithm.init;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(fail(algo_line, format!("init box [{lo}, {hi}] is empty")));
    }
    if !(algorithm.residual_tol >= 0.0) {
        return Err(fail(algo_line, "residual_tol must be nonnegative".into()));
    }

    Ok(RunConfig {
        game: raw.game,
        topology: TopologyConfig { inter: topo.inter, intra },
        algorithm,
        output: raw.output,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}
