//! Communication graphs, doubly stochastic weights and the composite mixing
//! matrix that couples the inter-cluster graph with every intra-cluster graph.
//!
//! Agent `(i, j)` (cluster `i`, agent `j`, both zero-based) occupies global row
//! `offset[i] + j` of the composite matrix. Agent `(i, 0)` is the cluster's
//! representative and the only one that talks across clusters.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::linalg::spectral_norm;

/// Row/column sum tolerance for stochasticity checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Undirected connected graph with a doubly stochastic weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    vertex_count: usize,
    edges: BTreeSet<(usize, usize)>,
    weights: DMatrix<f64>,
}

fn normalize_edges(
    vertex_count: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> Result<BTreeSet<(usize, usize)>> {
    let mut set = BTreeSet::new();
    for (u, v) in edges {
        if u >= vertex_count || v >= vertex_count {
            return Err(domain(format!(
                "edge ({u}, {v}) references a vertex outside 0..{vertex_count}"
            )));
        }
        if u == v {
            return Err(domain(format!("self-loop on vertex {u}")));
        }
        set.insert((u.min(v), u.max(v)));
    }
    Ok(set)
}

fn is_connected(vertex_count: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    let mut adj = vec![Vec::new(); vertex_count];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; vertex_count];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == vertex_count
}

impl GraphTopology {
    /// Validates a weight matrix against an edge set.
    pub fn new(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        weights: DMatrix<f64>,
    ) -> Result<Self> {
        if vertex_count == 0 {
            return Err(domain("graph needs at least one vertex"));
        }
        let edges = normalize_edges(vertex_count, edges)?;
        if weights.nrows() != vertex_count || weights.ncols() != vertex_count {
            return Err(domain(format!(
                "weight matrix is {}x{}, expected {vertex_count}x{vertex_count}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if !is_connected(vertex_count, &edges) {
            return Err(Error::Topology("graph is not connected".into()));
        }
        for i in 0..vertex_count {
            for j in 0..vertex_count {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::Topology(format!("weight ({i}, {j}) = {w} is not a nonnegative number")));
                }
                let linked = i == j || edges.contains(&(i.min(j), i.max(j)));
                if linked != (w > 0.0) {
                    return Err(Error::Topology(format!(
                        "weight ({i}, {j}) = {w} does not match the edge set"
                    )));
                }
            }
        }
        for i in 0..vertex_count {
            let row: f64 = weights.row(i).sum();
            let col: f64 = weights.column(i).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL || (col - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Topology(format!(
                    "row/column {i} sums to {row}/{col}, not 1"
                )));
            }
        }
        Ok(Self {
            vertex_count,
            edges,
            weights,
        })
    }

    /// Uniform weights `1/n` on the complete graph.
    pub fn uniform_complete(vertex_count: usize) -> Result<Self> {
        if vertex_count == 0 {
            return Err(domain("graph needs at least one vertex"));
        }
        let w = 1.0 / vertex_count as f64;
        Self::new(
            vertex_count,
            generators::complete(vertex_count),
            DMatrix::from_element(vertex_count, vertex_count, w),
        )
    }

    /// Parses an edge list and attaches Metropolis weights.
    ///
    /// When `vertex_count` is `None` it is inferred as the largest index + 1.
    pub fn from_edge_list(text: &str, vertex_count: Option<usize>) -> Result<Self> {
        let edges = parse_edge_list(text)?;
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(1);
        let n = vertex_count.unwrap_or(inferred);
        metropolis_weights(n, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Vertices with a positive weight in row `i`, ascending, `i` included.
    pub fn support(&self, i: usize) -> Vec<usize> {
        (0..self.vertex_count)
            .filter(|&j| self.weights[(i, j)] > 0.0)
            .collect()
    }

    /// Neighbors of `i`, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.vertex_count)
            .filter(|&j| j != i && self.weights[(i, j)] > 0.0)
            .collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(u, v)| u == i || v == i).count()
    }
}

/// Metropolis weights `w_ij = 1/(1 + max(d_i, d_j))` on each edge; the
/// diagonal absorbs the remainder of each row.
pub fn metropolis_weights(
    vertex_count: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> Result<GraphTopology> {
    if vertex_count == 0 {
        return Err(domain("graph needs at least one vertex"));
    }
    let edges = normalize_edges(vertex_count, edges)?;
    if !is_connected(vertex_count, &edges) {
        return Err(Error::Topology("graph is not connected".into()));
    }
    let mut degree = vec![0usize; vertex_count];
    for &(u, v) in &edges {
        degree[u] += 1;
        degree[v] += 1;
    }
    let mut w = DMatrix::zeros(vertex_count, vertex_count);
    for &(u, v) in &edges {
        let x = 1.0 / (1 + degree[u].max(degree[v])) as f64;
        w[(u, v)] = x;
        w[(v, u)] = x;
    }
    for i in 0..vertex_count {
        let off: f64 = (0..vertex_count).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    GraphTopology::new(vertex_count, edges, w)
}

/// Reads `u v` pairs, one per line. Blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("`{s}` is not a vertex index"),
            })
        };
        match fields.as_slice() {
            [u, v] => edges.push((parse(u)?, parse(v)?)),
            _ => {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected `u v`, found `{line}`"),
                })
            }
        }
    }
    Ok(edges)
}

/// Edge-set generators for common graph families.
pub mod generators {
    use super::*;

    pub fn path(n: usize) -> Vec<(usize, usize)> {
        (1..n).map(|i| (i - 1, i)).collect()
    }

    /// Cycle on `n` vertices; degenerates to a path for `n < 3`.
    pub fn ring(n: usize) -> Vec<(usize, usize)> {
        let mut e = path(n);
        if n >= 3 {
            e.push((n - 1, 0));
        }
        e
    }

    pub fn complete(n: usize) -> Vec<(usize, usize)> {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect()
    }

    pub fn star(n: usize) -> Vec<(usize, usize)> {
        (1..n).map(|i| (0, i)).collect()
    }

    /// Random spanning tree plus each remaining pair with probability `extra`.
    pub fn random_connected<R: Rng + ?Sized>(n: usize, extra: f64, rng: &mut R) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for v in 1..n {
            let u = rng.random_range(0..v);
            set.insert((u, v));
        }
        for (u, v) in complete(n) {
            if !set.contains(&(u, v)) && rng.random::<f64>() < extra {
                set.insert((u, v));
            }
        }
        set.into_iter().collect()
    }
}

/// Named graph family, used by configuration files and the web demo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Ring,
    Path,
    Complete,
    Star,
}

impl GraphKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "ring" => Some(Self::Ring),
            "path" => Some(Self::Path),
            "complete" => Some(Self::Complete),
            "star" => Some(Self::Star),
            _ => None,
        }
    }

    pub fn edges(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Self::Ring => generators::ring(n),
            Self::Path => generators::path(n),
            Self::Complete => generators::complete(n),
            Self::Star => generators::star(n),
        }
    }

    pub fn metropolis(self, n: usize) -> Result<GraphTopology> {
        metropolis_weights(n, self.edges(n))
    }
}

/// The `n x n` mixing matrix of the whole agent network, with its stationary
/// weights and contraction factors.
#[derive(Debug, Clone)]
pub struct CompositeMixing {
    matrix: DMatrix<f64>,
    pi: DVector<f64>,
    sigma: f64,
    cluster_sigmas: Vec<f64>,
    cluster_sizes: Vec<usize>,
    offsets: Vec<usize>,
    inter: GraphTopology,
    intra: Vec<GraphTopology>,
}

/// Builds the composite matrix: each cluster's intra-graph block, with the
/// representative's row halved, plus half of the inter-cluster weights on the
/// representative-to-representative entries.
pub fn compose_adjacency(inter: GraphTopology, intra: Vec<GraphTopology>) -> Result<CompositeMixing> {
    let m = inter.vertex_count();
    if intra.len() != m {
        return Err(domain(format!(
            "inter-cluster graph has {m} vertices but {} intra-cluster graphs were given",
            intra.len()
        )));
    }
    let cluster_sizes: Vec<usize> = intra.iter().map(GraphTopology::vertex_count).collect();
    let mut offsets = Vec::with_capacity(m);
    let mut n = 0;
    for &s in &cluster_sizes {
        offsets.push(n);
        n += s;
    }

    let mut a = DMatrix::zeros(n, n);
    for (i, g) in intra.iter().enumerate() {
        let o = offsets[i];
        for j in 0..g.vertex_count() {
            let scale = if j == 0 { 0.5 } else { 1.0 };
            for l in 0..g.vertex_count() {
                a[(o + j, o + l)] = scale * g.weight(j, l);
            }
        }
    }
    for i in 0..m {
        for h in 0..m {
            a[(offsets[i], offsets[h])] += 0.5 * inter.weight(i, h);
        }
    }

    let pi = stationary_weights(m, &cluster_sizes)?;
    let sigma = contraction_of(&a, &pi);
    let cluster_sigmas = intra.iter().map(cluster_contraction).collect();
    Ok(CompositeMixing {
        matrix: a,
        pi,
        sigma,
        cluster_sigmas,
        cluster_sizes,
        offsets,
        inter,
        intra,
    })
}

/// Closed-form left eigenvector of the composite matrix: `2/(n+m)` for each
/// representative, `1/(n+m)` for everyone else.
pub fn stationary_weights(m: usize, cluster_sizes: &[usize]) -> Result<DVector<f64>> {
    if m == 0 || cluster_sizes.len() != m {
        return Err(domain(format!(
            "expected {m} cluster sizes (m >= 1), got {}",
            cluster_sizes.len()
        )));
    }
    if cluster_sizes.contains(&0) {
        return Err(domain("cluster sizes must be positive"));
    }
    let n: usize = cluster_sizes.iter().sum();
    let denom = (n + m) as f64;
    let mut pi = Vec::with_capacity(n);
    for &s in cluster_sizes {
        pi.push(2.0 / denom);
        pi.extend(std::iter::repeat_n(1.0 / denom, s - 1));
    }
    Ok(DVector::from_vec(pi))
}

fn sqrt_pi_similarity(b: &DMatrix<f64>, pi: &DVector<f64>) -> DMatrix<f64> {
    let s = pi.map(f64::sqrt);
    let mut out = b.clone();
    for r in 0..b.nrows() {
        for c in 0..b.ncols() {
            out[(r, c)] *= s[r] / s[c];
        }
    }
    out
}

fn contraction_of(a: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    let n = a.nrows();
    let a_inf = DVector::from_element(n, 1.0) * pi.transpose();
    spectral_norm(&sqrt_pi_similarity(&(a - a_inf), pi))
}

/// `σ = ‖diag(√π)(𝒜 − 𝟏πᵀ)diag(√π)⁻¹‖₂`.
pub fn contraction_factor(composite: &CompositeMixing) -> f64 {
    contraction_of(&composite.matrix, &composite.pi)
}

/// `σᵢ = ‖Aᵢ − 𝟏𝟏ᵀ/nᵢ‖₂`.
pub fn cluster_contraction(intra: &GraphTopology) -> f64 {
    let n = intra.vertex_count();
    let avg = DMatrix::from_element(n, n, 1.0 / n as f64);
    spectral_norm(&(intra.weights() - avg))
}

/// `‖X‖_F^π = ‖diag(√π) X‖_F`.
pub fn weighted_fro_norm(x: &DMatrix<f64>, pi: &DVector<f64>) -> Result<f64> {
    if x.nrows() != pi.len() {
        return Err(domain(format!(
            "matrix has {} rows, weight vector has {} entries",
            x.nrows(),
            pi.len()
        )));
    }
    let mut acc = 0.0;
    for (r, w) in pi.iter().enumerate() {
        acc += w * x.row(r).iter().map(|v| v * v).sum::<f64>();
    }
    Ok(acc.sqrt())
}

/// `‖x‖_π = ‖diag(√π) x‖`.
pub fn weighted_euc_norm(x: &DVector<f64>, pi: &DVector<f64>) -> Result<f64> {
    if x.len() != pi.len() {
        return Err(domain(format!(
            "vector has {} entries, weight vector has {}",
            x.len(),
            pi.len()
        )));
    }
    Ok(x.iter().zip(pi.iter()).map(|(v, w)| w * v * v).sum::<f64>().sqrt())
}

impl CompositeMixing {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cluster_sigmas(&self) -> &[f64] {
        &self.cluster_sigmas
    }

    pub fn sigma_max(&self) -> f64 {
        self.cluster_sigmas.iter().copied().fold(0.0, f64::max)
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn agent_count(&self) -> usize {
        self.matrix.nrows()
    }

    /// Global row of agent `j` in cluster `i`.
    pub fn global_index(&self, cluster: usize, agent: usize) -> usize {
        self.offsets[cluster] + agent
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn inter(&self) -> &GraphTopology {
        &self.inter
    }

    pub fn intra(&self, cluster: usize) -> &GraphTopology {
        &self.intra[cluster]
    }

    /// `𝒜_∞ = 𝟏ₙπᵀ`.
    pub fn consensus_matrix(&self) -> DMatrix<f64> {
        DVector::from_element(self.agent_count(), 1.0) * self.pi.transpose()
    }

    pub fn pi_min(&self) -> f64 {
        1.0 / (self.agent_count() + self.cluster_count()) as f64
    }

    pub fn pi_max(&self) -> f64 {
        2.0 / (self.agent_count() + self.cluster_count()) as f64
    }

    /// Matrix norm induced by `‖·‖_π`.
    pub fn pi_operator_norm(&self, b: &DMatrix<f64>) -> f64 {
        spectral_norm(&sqrt_pi_similarity(b, &self.pi))
    }
}
