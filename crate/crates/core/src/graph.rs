//! Two-layer undirected graphs with exclusive strong and weak link layers.
//!
//! Node ids are dense integers `0..node_count`. Each layer stores a sorted,
//! duplicate-free neighbor list per node; a node pair may be linked in at
//! most one layer.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

/// The two exclusive link types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Strong,
    Weak,
}

impl Layer {
    pub fn other(self) -> Layer {
        match self {
            Layer::Strong => Layer::Weak,
            Layer::Weak => Layer::Strong,
        }
    }

    fn code(self) -> char {
        match self {
            Layer::Strong => 's',
            Layer::Weak => 'w',
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Strong => f.write_str("strong"),
            Layer::Weak => f.write_str("weak"),
        }
    }
}

impl FromStr for Layer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s" | "strong" => Ok(Layer::Strong),
            "w" | "weak" => Ok(Layer::Weak),
            other => Err(format!("unknown layer `{other}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("pair ({0}, {1}) already linked in the other layer")]
    LayerConflict(NodeId, NodeId),
    #[error("node {node} out of range for a graph with {node_count} nodes")]
    NodeOutOfRange { node: NodeId, node_count: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("graph has no triads")]
    NoTriads,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GraphError {
    fn from(e: std::io::Error) -> Self {
        GraphError::Io(e.to_string())
    }
}

/// Per-node degree moments of a two-layer graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DegreeMoments {
    pub k_s: f64,
    pub k_w: f64,
    pub k_ss: f64,
    pub k_ww: f64,
    pub k_sw: f64,
}

impl DegreeMoments {
    /// Moments of paired per-node strong and weak degree sequences.
    pub fn from_degrees(strong: &[usize], weak: &[usize]) -> Result<Self, GraphError> {
        assert_eq!(strong.len(), weak.len(), "degree sequences must be paired per node");
        if strong.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let (mut s, mut w, mut ss, mut ww, mut sw) = (0u64, 0u64, 0u64, 0u64, 0u64);
        for (&ks, &kw) in strong.iter().zip(weak) {
            let (ks, kw) = (ks as u64, kw as u64);
            s += ks;
            w += kw;
            ss += ks * ks;
            ww += kw * kw;
            sw += ks * kw;
        }
        let n = strong.len() as f64;
        Ok(DegreeMoments {
            k_s: s as f64 / n,
            k_w: w as f64 / n,
            k_ss: ss as f64 / n,
            k_ww: ww as f64 / n,
            k_sw: sw as f64 / n,
        })
    }
}

fn insert_sorted(list: &mut Vec<NodeId>, v: NodeId) -> bool {
    match list.binary_search(&v) {
        Ok(_) => false,
        Err(pos) => {
            list.insert(pos, v);
            true
        }
    }
}

/// Undirected graph with a strong and a weak adjacency layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoLayerGraph {
    strong: Vec<Vec<NodeId>>,
    weak: Vec<Vec<NodeId>>,
}

impl TwoLayerGraph {
    pub fn new(node_count: usize) -> Self {
        TwoLayerGraph {
            strong: vec![Vec::new(); node_count],
            weak: vec![Vec::new(); node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.strong.len()
    }

    fn check_pair(&self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        let n = self.node_count();
        for node in [u, v] {
            if node >= n {
                return Err(GraphError::NodeOutOfRange { node, node_count: n });
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        Ok(())
    }

    /// Adds an undirected edge to `layer`. Re-adding an existing edge is a
    /// no-op and returns `Ok(false)`.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId, layer: Layer) -> Result<bool, GraphError> {
        self.check_pair(u, v)?;
        if self.neighbors(u, layer.other()).binary_search(&v).is_ok() {
            return Err(GraphError::LayerConflict(u.min(v), u.max(v)));
        }
        let adj = self.layer_mut(layer);
        if !insert_sorted(&mut adj[u], v) {
            return Ok(false);
        }
        insert_sorted(&mut adj[v], u);
        Ok(true)
    }

    fn layer_mut(&mut self, layer: Layer) -> &mut Vec<Vec<NodeId>> {
        match layer {
            Layer::Strong => &mut self.strong,
            Layer::Weak => &mut self.weak,
        }
    }

    pub fn neighbors(&self, node: NodeId, layer: Layer) -> &[NodeId] {
        match layer {
            Layer::Strong => &self.strong[node],
            Layer::Weak => &self.weak[node],
        }
    }

    pub fn degree(&self, node: NodeId, layer: Layer) -> usize {
        self.neighbors(node, layer).len()
    }

    /// Layer of the link between `u` and `v`, if any.
    pub fn link(&self, u: NodeId, v: NodeId) -> Option<Layer> {
        if self.strong[u].binary_search(&v).is_ok() {
            Some(Layer::Strong)
        } else if self.weak[u].binary_search(&v).is_ok() {
            Some(Layer::Weak)
        } else {
            None
        }
    }

    pub fn has_link(&self, u: NodeId, v: NodeId) -> bool {
        self.link(u, v).is_some()
    }

    pub fn edge_count(&self, layer: Layer) -> usize {
        match layer {
            Layer::Strong => self.strong.iter().map(Vec::len).sum::<usize>() / 2,
            Layer::Weak => self.weak.iter().map(Vec::len).sum::<usize>() / 2,
        }
    }

    /// All edges as `(u, v, layer)` with `u < v`, ordered by `(u, v)`.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, Layer)> {
        (0..self.node_count())
            .flat_map(|u| {
                self.typed_neighbors(u)
                    .into_iter()
                    .filter(move |&(v, _)| v > u)
                    .map(move |(v, layer)| (u, v, layer))
            })
            .collect()
    }

    /// Neighbors across both layers, sorted by id, tagged with the link layer.
    pub fn typed_neighbors(&self, node: NodeId) -> Vec<(NodeId, Layer)> {
        let (s, w) = (&self.strong[node], &self.weak[node]);
        let mut out = Vec::with_capacity(s.len() + w.len());
        let (mut i, mut j) = (0, 0);
        while i < s.len() || j < w.len() {
            if j == w.len() || (i < s.len() && s[i] < w[j]) {
                out.push((s[i], Layer::Strong));
                i += 1;
            } else {
                out.push((w[j], Layer::Weak));
                j += 1;
            }
        }
        out
    }

    pub fn degree_moments(&self) -> Result<DegreeMoments, GraphError> {
        let strong: Vec<usize> = self.strong.iter().map(Vec::len).collect();
        let weak: Vec<usize> = self.weak.iter().map(Vec::len).collect();
        DegreeMoments::from_degrees(&strong, &weak)
    }

    /// Union of both layers with link types discarded.
    pub fn collapse(&self) -> SimpleGraph {
        let adjacency = (0..self.node_count())
            .map(|i| self.typed_neighbors(i).into_iter().map(|(v, _)| v).collect())
            .collect();
        SimpleGraph { adjacency }
    }

    /// Builds a graph from a single layer of `g`, mapped onto `layer`.
    pub fn from_simple(g: &SimpleGraph, layer: Layer) -> Self {
        let mut out = TwoLayerGraph::new(g.node_count());
        *out.layer_mut(layer) = g.adjacency.clone();
        out
    }

    /// Checks symmetry, sortedness, absence of self-loops and layer exclusivity.
    pub fn validate(&self) -> Result<(), String> {
        for layer in [Layer::Strong, Layer::Weak] {
            for u in 0..self.node_count() {
                let list = self.neighbors(u, layer);
                if list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(format!("{layer} list of {u} not strictly sorted"));
                }
                for &v in list {
                    if v == u {
                        return Err(format!("self-loop at {u}"));
                    }
                    if self.neighbors(v, layer).binary_search(&u).is_err() {
                        return Err(format!("{layer} edge {u}-{v} not symmetric"));
                    }
                    if self.neighbors(u, layer.other()).binary_search(&v).is_ok() {
                        return Err(format!("pair {u}-{v} in both layers"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the edge-list text format: a `nodes <N>` header followed by
    /// one `<u> <v> <s|w>` line per edge with `u < v`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<(), GraphError> {
        writeln!(out, "nodes {}", self.node_count())?;
        for (u, v, layer) in self.edges() {
            writeln!(out, "{u} {v} {}", layer.code())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self, GraphError> {
        let mut graph: Option<TwoLayerGraph> = None;
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| GraphError::Parse { line: line_no, message };
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields[0] == "nodes" {
                if graph.is_some() {
                    return Err(parse_err("duplicate `nodes` header".into()));
                }
                let n = fields
                    .get(1)
                    .ok_or_else(|| parse_err("missing node count".into()))?
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad node count: {e}")))?;
                graph = Some(TwoLayerGraph::new(n));
                continue;
            }
            let g = graph
                .as_mut()
                .ok_or_else(|| parse_err("edge before `nodes <N>` header".into()))?;
            if fields.len() != 3 {
                return Err(parse_err(format!("expected `<u> <v> <s|w>`, got `{trimmed}`")));
            }
            let u = fields[0].parse::<usize>().map_err(|e| parse_err(format!("bad id: {e}")))?;
            let v = fields[1].parse::<usize>().map_err(|e| parse_err(format!("bad id: {e}")))?;
            let layer = fields[2].parse::<Layer>().map_err(parse_err)?;
            g.add_edge(u, v, layer).map_err(|e| parse_err(e.to_string()))?;
        }
        graph.ok_or(GraphError::Parse { line: 0, message: "missing `nodes <N>` header".into() })
    }
}

/// Single-layer undirected graph, used for collapsed networks and the
/// single-layer generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleGraph {
    adjacency: Vec<Vec<NodeId>>,
}

impl SimpleGraph {
    pub fn new(node_count: usize) -> Self {
        SimpleGraph { adjacency: vec![Vec::new(); node_count] }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<bool, GraphError> {
        let n = self.node_count();
        for node in [u, v] {
            if node >= n {
                return Err(GraphError::NodeOutOfRange { node, node_count: n });
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if !insert_sorted(&mut self.adjacency[u], v) {
            return Ok(false);
        }
        insert_sorted(&mut self.adjacency[v], u);
        Ok(true)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn mean_degree(&self) -> f64 {
        if self.node_count() == 0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }

    /// Σ_i C(k_i, 2).
    pub fn triad_count(&self) -> u64 {
        self.adjacency
            .iter()
            .map(|a| {
                let k = a.len() as u64;
                k * k.saturating_sub(1) / 2
            })
            .sum()
    }

    /// Number of triangles, by forward-neighbor intersection under a degree ordering.
    pub fn triangle_count(&self) -> u64 {
        let forward = forward_lists(self.node_count(), |u| self.adjacency[u].iter().map(|&v| (v, ())));
        forward
            .iter()
            .map(|fu| {
                fu.iter()
                    .map(|&(v, ())| sorted_intersection_count(fu, &forward[v]))
                    .sum::<u64>()
            })
            .sum()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }
}

/// Global clustering coefficient (transitivity) `3T / Σ_i C(k_i, 2)`.
pub fn global_clustering(g: &SimpleGraph) -> Result<f64, GraphError> {
    let triads = g.triad_count();
    if triads == 0 {
        return Err(GraphError::NoTriads);
    }
    Ok(3.0 * g.triangle_count() as f64 / triads as f64)
}

/// Orients each edge from lower to higher `(degree, id)` rank and returns the
/// forward lists sorted by neighbor id.
pub(crate) fn forward_lists<T, I, F>(n: usize, neighbors: F) -> Vec<Vec<(NodeId, T)>>
where
    F: Fn(NodeId) -> I,
    I: Iterator<Item = (NodeId, T)>,
{
    let degree: Vec<usize> = (0..n).map(|u| neighbors(u).count()).collect();
    let ranks_before = |u: NodeId, v: NodeId| (degree[u], u) < (degree[v], v);
    (0..n)
        .map(|u| neighbors(u).filter(|&(v, _)| ranks_before(u, v)).collect())
        .collect()
}

fn sorted_intersection_count<A, B>(a: &[(NodeId, A)], b: &[(NodeId, B)]) -> u64 {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}
