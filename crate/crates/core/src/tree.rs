//! Tree topologies and zero-field Ising models on them.
//!
//! A tree-structured Ising model on `p` spins with edge interactions `theta_e`
//! has uniform single-site marginals and factorizes over its edges:
//!
//! ```text
//! p(x) = 1/2 * prod_{(i,j) in E} (1 + x_i x_j mu_ij) / 2,   mu_ij = tanh(theta_ij)
//! ```
//!
//! Every pairwise correlation is the product of the edge correlations along the
//! unique path joining the two vertices, so it decays with path length.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsu::DisjointSets;
use crate::error::{Error, Result};

/// Labeled undirected tree on vertices `0..p`, rooted at vertex 0.
///
/// Edges are stored as `(i, j)` with `i < j`, sorted lexicographically, so two
/// topologies with the same edge set compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTopology {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    parent: Vec<Option<usize>>,
    parent_edge: Vec<Option<usize>>,
    depth: Vec<usize>,
    bfs_order: Vec<usize>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl TreeTopology {
    pub const ROOT: usize = 0;

    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidTree("a tree needs at least one vertex".into()));
        }
        let mut normalized = Vec::with_capacity(vertex_count.saturating_sub(1));
        for (a, b) in edges {
            for v in [a, b] {
                if v >= vertex_count {
                    return Err(Error::VertexOutOfRange { vertex: v, p: vertex_count });
                }
            }
            if a == b {
                return Err(Error::InvalidTree(format!("self-loop at vertex {a}")));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        if normalized.len() != vertex_count - 1 {
            return Err(Error::InvalidTree(format!(
                "expected {} edges for p = {vertex_count}, found {}",
                vertex_count - 1,
                normalized.len()
            )));
        }
        let mut sets = DisjointSets::new(vertex_count);
        for &(a, b) in &normalized {
            if !sets.union(a, b) {
                return Err(Error::InvalidTree(format!("edge ({a}, {b}) closes a cycle")));
            }
        }
        normalized.sort_unstable();
        Ok(Self::from_sorted_edges(vertex_count, normalized))
    }

    // `edges` must already be a validated, sorted spanning tree.
    fn from_sorted_edges(vertex_count: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (idx, &(a, b)) in edges.iter().enumerate() {
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
        }
        let mut parent = vec![None; vertex_count];
        let mut parent_edge = vec![None; vertex_count];
        let mut depth = vec![0; vertex_count];
        let mut visited = vec![false; vertex_count];
        let mut bfs_order = Vec::with_capacity(vertex_count);
        let mut queue = VecDeque::from([Self::ROOT]);
        visited[Self::ROOT] = true;
        while let Some(v) = queue.pop_front() {
            bfs_order.push(v);
            for &(w, idx) in &adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    parent[w] = Some(v);
                    parent_edge[w] = Some(idx);
                    depth[w] = depth[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        TreeTopology {
            vertex_count,
            edges,
            parent,
            parent_edge,
            depth,
            bfs_order,
            adjacency,
        }
    }

    /// Path 0 - 1 - ... - (p-1).
    pub fn chain(vertex_count: usize) -> Result<Self> {
        Self::new(vertex_count, (1..vertex_count).map(|v| (v - 1, v)))
    }

    /// Star with every other vertex attached to `center`.
    pub fn star(vertex_count: usize, center: usize) -> Result<Self> {
        if center >= vertex_count {
            return Err(Error::VertexOutOfRange { vertex: center, p: vertex_count });
        }
        Self::new(
            vertex_count,
            (0..vertex_count).filter(|&v| v != center).map(|v| (center, v)),
        )
    }

    /// Decodes a Prüfer sequence of length `p - 2`.
    pub fn from_prufer(vertex_count: usize, sequence: &[usize]) -> Result<Self> {
        if vertex_count < 2 {
            return Self::new(vertex_count, std::iter::empty());
        }
        if sequence.len() != vertex_count - 2 {
            return Err(Error::InvalidTree(format!(
                "Prüfer sequence for p = {vertex_count} must have length {}",
                vertex_count - 2
            )));
        }
        let mut degree = vec![1usize; vertex_count];
        for &v in sequence {
            if v >= vertex_count {
                return Err(Error::VertexOutOfRange { vertex: v, p: vertex_count });
            }
            degree[v] += 1;
        }
        let mut edges = Vec::with_capacity(vertex_count - 1);
        for &v in sequence {
            let leaf = (0..vertex_count).find(|&u| degree[u] == 1).expect("a leaf always exists");
            edges.push((leaf, v));
            degree[leaf] -= 1;
            degree[v] -= 1;
        }
        let rest: Vec<usize> = (0..vertex_count).filter(|&u| degree[u] == 1).collect();
        edges.push((rest[0], rest[1]));
        Self::new(vertex_count, edges)
    }

    /// Uniformly random labeled tree (uniform Prüfer sequence).
    pub fn random<R: Rng + ?Sized>(vertex_count: usize, rng: &mut R) -> Result<Self> {
        let sequence: Vec<usize> = (0..vertex_count.saturating_sub(2))
            .map(|_| rng.gen_range(0..vertex_count))
            .collect();
        Self::from_prufer(vertex_count, &sequence)
    }

    /// Random tree built by attaching each vertex of a shuffled order to a
    /// uniformly chosen earlier vertex. Produces deeper trees than Prüfer
    /// sampling on average; used to vary test instances.
    pub fn random_recursive<R: Rng + ?Sized>(vertex_count: usize, rng: &mut R) -> Result<Self> {
        let mut order: Vec<usize> = (0..vertex_count).collect();
        order.shuffle(rng);
        let edges: Vec<(usize, usize)> = (1..vertex_count)
            .map(|k| (order[rng.gen_range(0..k)], order[k]))
            .collect();
        Self::new(vertex_count, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn root(&self) -> usize {
        Self::ROOT
    }

    /// Parent of `v` in the tree rooted at vertex 0; `None` for the root.
    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    /// Index of the edge joining `v` to its parent.
    pub fn parent_edge(&self, v: usize) -> Option<usize> {
        self.parent_edge[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    /// Vertices in breadth-first order from the root (nondecreasing depth).
    pub fn bfs_order(&self) -> &[usize] {
        &self.bfs_order
    }

    /// `(neighbor, edge index)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.vertex_count {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, p: self.vertex_count })
        }
    }

    /// Indices of the edges on the unique path between `a` and `b`.
    pub fn path_edges(&self, a: usize, b: usize) -> Result<Vec<usize>> {
        self.check_vertex(a)?;
        self.check_vertex(b)?;
        let (mut u, mut w) = (a, b);
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while self.depth[u] > self.depth[w] {
            from_a.push(self.parent_edge[u].unwrap());
            u = self.parent[u].unwrap();
        }
        while self.depth[w] > self.depth[u] {
            from_b.push(self.parent_edge[w].unwrap());
            w = self.parent[w].unwrap();
        }
        while u != w {
            from_a.push(self.parent_edge[u].unwrap());
            from_b.push(self.parent_edge[w].unwrap());
            u = self.parent[u].unwrap();
            w = self.parent[w].unwrap();
        }
        from_a.extend(from_b.into_iter().rev());
        Ok(from_a)
    }
}

/// Sign-valued spin configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        check_spins(&values)?;
        Ok(SpinVector(values))
    }

    /// Decodes a state index: bit `b` set means vertex `b` is -1.
    pub fn from_state_index(index: usize, vertex_count: usize) -> Self {
        SpinVector((0..vertex_count).map(|b| if index >> b & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }
}

impl std::ops::Deref for SpinVector {
    type Target = [i8];

    fn deref(&self) -> &[i8] {
        &self.0
    }
}

pub(crate) fn check_spins(values: &[i8]) -> Result<()> {
    match values.iter().find(|&&s| s != 1 && s != -1) {
        Some(s) => Err(Error::InvalidParameter(format!("spin value {s} is not +1 or -1"))),
        None => Ok(()),
    }
}

/// A distribution that factorizes over a tree with per-edge correlations.
///
/// Implemented by the ground-truth [`IsingTreeModel`] and by fitted estimates,
/// so metrics and moment formulas accept either.
pub trait TreeDistribution {
    fn topology(&self) -> &TreeTopology;

    /// Correlation `E[X_i X_j]` of each edge, aligned with `topology().edges()`.
    fn edge_mu(&self) -> &[f64];

    fn vertex_count(&self) -> usize {
        self.topology().vertex_count()
    }

    /// `E[X_i X_j]`: product of edge correlations along the path from i to j.
    fn pair_correlation(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::InvalidPair(i));
        }
        let mu = self.edge_mu();
        Ok(self.topology().path_edges(i, j)?.into_iter().map(|e| mu[e]).product())
    }

    /// Correlations between `source` and every vertex (1 at `source`), in one
    /// traversal.
    fn correlations_from(&self, source: usize) -> Vec<f64> {
        let topo = self.topology();
        let mu = self.edge_mu();
        let mut out = vec![0.0; topo.vertex_count()];
        let mut seen = vec![false; topo.vertex_count()];
        let mut stack = vec![source];
        out[source] = 1.0;
        seen[source] = true;
        while let Some(v) = stack.pop() {
            for &(w, e) in topo.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    out[w] = out[v] * mu[e];
                    stack.push(w);
                }
            }
        }
        out
    }

    /// Natural log of the probability of `x`; `-inf` for configurations with
    /// zero mass (only possible when some |mu_e| = 1).
    fn log_pmf(&self, x: &[i8]) -> Result<f64> {
        let topo = self.topology();
        if x.len() != topo.vertex_count() {
            return Err(Error::DimensionMismatch { expected: topo.vertex_count(), found: x.len() });
        }
        check_spins(x)?;
        let mu = self.edge_mu();
        let mut log_p = -std::f64::consts::LN_2;
        for (&(a, b), &m) in topo.edges().iter().zip(mu) {
            let agree = f64::from(x[a] * x[b]);
            log_p += ((1.0 + agree * m) / 2.0).ln();
        }
        Ok(log_p)
    }
}

/// Zero-field Ising model on a tree, with every interaction bounded away from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingTreeModel {
    topology: TreeTopology,
    theta: Vec<f64>,
    mu: Vec<f64>,
}

impl IsingTreeModel {
    /// Builds a model from `(i, j, theta)` triples.
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut triples: Vec<(usize, usize, f64)> = edges
            .into_iter()
            .map(|(a, b, t)| (a.min(b), a.max(b), t))
            .collect();
        triples.sort_by_key(|t| (t.0, t.1));
        let topology = TreeTopology::new(vertex_count, triples.iter().map(|&(a, b, _)| (a, b)))?;
        Self::from_topology(topology, triples.into_iter().map(|t| t.2).collect())
    }

    /// `theta` must be aligned with `topology.edges()`.
    pub fn from_topology(topology: TreeTopology, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != topology.edge_count() {
            return Err(Error::DimensionMismatch { expected: topology.edge_count(), found: theta.len() });
        }
        for (&(a, b), &t) in topology.edges().iter().zip(&theta) {
            if !t.is_finite() || t == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "interaction on edge ({a}, {b}) must be finite and nonzero, got {t}"
                )));
            }
        }
        let mu = theta.iter().map(|t| t.tanh()).collect();
        Ok(IsingTreeModel { topology, theta, mu })
    }

    /// Same |theta| on every edge.
    pub fn uniform(topology: TreeTopology, theta: f64) -> Result<Self> {
        let n = topology.edge_count();
        Self::from_topology(topology, vec![theta; n])
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Smallest |theta_e|; infinite for the single-vertex model.
    pub fn alpha(&self) -> f64 {
        self.theta.iter().map(|t| t.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Largest |theta_e|; zero for the single-vertex model.
    pub fn beta(&self) -> f64 {
        self.theta.iter().map(|t| t.abs()).fold(0.0, f64::max)
    }

    /// `tanh(theta_e)` for edge index `edge`.
    pub fn edge_correlation(&self, edge: usize) -> Result<f64> {
        self.mu.get(edge).copied().ok_or_else(|| {
            Error::InvalidParameter(format!("edge index {edge} out of range ({} edges)", self.mu.len()))
        })
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            p: self.topology.vertex_count(),
            edges: self
                .topology
                .edges()
                .iter()
                .zip(&self.theta)
                .map(|(&(a, b), &t)| (a, b, t))
                .collect(),
        }
    }

    pub fn from_json(json: &ModelJson) -> Result<Self> {
        Self::new(json.p, json.edges.iter().copied())
    }
}

impl TreeDistribution for IsingTreeModel {
    fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    fn edge_mu(&self) -> &[f64] {
        &self.mu
    }
}

/// Wire form of a model: `{"p": int, "edges": [[i, j, theta], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub p: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Wire form of a bare topology: `{"p": int, "edges": [[i, j], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyJson {
    pub p: usize,
    pub edges: Vec<(usize, usize)>,
}

impl From<&TreeTopology> for TopologyJson {
    fn from(topo: &TreeTopology) -> Self {
        TopologyJson { p: topo.vertex_count(), edges: topo.edges().to_vec() }
    }
}

impl TryFrom<&TopologyJson> for TreeTopology {
    type Error = Error;

    fn try_from(json: &TopologyJson) -> Result<Self> {
        TreeTopology::new(json.p, json.edges.iter().copied())
    }
}

/// Mutual information (bits) between two uniform signs with correlation `mu`:
/// `I = 1/2 log2[(1-mu)^(1-mu) (1+mu)^(1+mu)]`.
pub fn mutual_information(mu: f64) -> Result<f64> {
    if !(mu.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("mutual information needs |mu| < 1, got {mu}")));
    }
    Ok(0.5 * ((1.0 - mu) * (1.0 - mu).log2() + (1.0 + mu) * (1.0 + mu).log2()))
}
