//! Synthetic network generators.
//!
//! The two-layer generator is a Newman–Watts style small world per layer: a
//! ring lattice carrying most of the target degree plus uniformly random
//! shortcut edges. Both layers share the ring ordering; the weak ring uses the
//! offsets just beyond the strong ring, so the layers stay exclusive and
//! triangles of every composition occur.
//!
//! The single-layer generators (small world, Barabási–Albert, Holme–Kim and
//! uniform-attachment recursive trees) serve the approximation-error study.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Layer, NodeId, SimpleGraph, TwoLayerGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    ModifiedWs,
    HolmeKim,
    Ba,
    Rrt,
}

impl Model {
    pub fn short_name(self) -> &'static str {
        match self {
            Model::ModifiedWs => "sw",
            Model::HolmeKim => "hk",
            Model::Ba => "ba",
            Model::Rrt => "rrt",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sw" | "ws" | "modified_ws" => Ok(Model::ModifiedWs),
            "hk" | "holme_kim" => Ok(Model::HolmeKim),
            "ba" => Ok(Model::Ba),
            "rrt" => Ok(Model::Rrt),
            other => Err(format!("unknown model `{other}` (expected sw, hk, ba or rrt)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Share of the target mean degree carried by the ring lattice.
    pub ring_fraction: f64,
    /// Per-ring-edge shortcut probability. `None` picks the value that makes
    /// the expected mean degree hit the target.
    pub shortcut_probability: Option<f64>,
    /// Edges per arrival for ba/hk/rrt. `None` means `round(target / 2)` for
    /// ba/hk and 1 for rrt (unless `rrt_match_degree`).
    pub attachment_count: Option<usize>,
    /// Let rrt default to `round(target / 2)` edges per arrival like ba/hk,
    /// instead of growing a tree.
    pub rrt_match_degree: bool,
    /// Holme–Kim triad-formation probability.
    pub triad_probability: f64,
    /// Minimum weak degree enforced after generation.
    pub weak_floor: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            ring_fraction: 0.8,
            shortcut_probability: None,
            attachment_count: None,
            rrt_match_degree: false,
            triad_probability: 0.5,
            weak_floor: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub model: Model,
    pub node_count: usize,
    pub strong_mean_degree_range: (f64, f64),
    /// Also the target range for single-layer generation.
    pub weak_mean_degree_range: (f64, f64),
    pub model_params: ModelParams,
    pub rng_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            model: Model::ModifiedWs,
            node_count: 4000,
            strong_mean_degree_range: (10.0, 20.0),
            weak_mean_degree_range: (100.0, 200.0),
            model_params: ModelParams::default(),
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("target mean degree {target} infeasible for {node_count} nodes")]
    InfeasibleTarget { target: f64, node_count: usize },
    #[error("model {0} cannot generate a two-layer graph")]
    UnsupportedModel(Model),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::InvalidConfig(m));
        if self.node_count == 0 {
            return bad("node_count must be positive".into());
        }
        for (name, (lo, hi)) in [
            ("strong_mean_degree_range", self.strong_mean_degree_range),
            ("weak_mean_degree_range", self.weak_mean_degree_range),
        ] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"));
            }
        }
        let p = &self.model_params;
        if !(p.ring_fraction > 0.0 && p.ring_fraction <= 1.0) {
            return bad("ring_fraction must lie in (0, 1]".into());
        }
        if let Some(s) = p.shortcut_probability {
            if !(0.0..=1.0).contains(&s) {
                return bad("shortcut_probability must lie in [0, 1]".into());
            }
        }
        if !(0.0..=1.0).contains(&p.triad_probability) {
            return bad("triad_probability must lie in [0, 1]".into());
        }
        if p.attachment_count == Some(0) {
            return bad("attachment_count must be positive".into());
        }
        Ok(())
    }
}

/// Uniform draw from a closed range; degenerate ranges return the bound.
pub fn draw_target<R: Rng + ?Sized>(range: (f64, f64), rng: &mut R) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..=range.1)
    } else {
        range.0
    }
}

/// Largest even ring degree `≈ fraction * target` that fits in `n` nodes.
fn ring_degree(target: f64, fraction: f64, n: usize) -> usize {
    let k = 2 * (fraction * target / 2.0).round() as usize;
    let max_even = (n.saturating_sub(1)) & !1;
    k.min(max_even)
}

fn shortcut_count<R: Rng + ?Sized>(
    n: usize,
    ring: usize,
    target: f64,
    probability: Option<f64>,
    rng: &mut R,
) -> usize {
    if ring == 0 {
        return match probability {
            Some(_) => 0,
            None => (n as f64 * target / 2.0).round() as usize,
        };
    }
    let p = probability
        .unwrap_or((target - ring as f64) / ring as f64)
        .clamp(0.0, 1.0);
    let ring_edges = n * ring / 2;
    (0..ring_edges).filter(|_| rng.random_bool(p)).count()
}

/// Samples a uniformly random unlinked pair of distinct nodes.
fn random_free_pair<R, F>(n: usize, linked: F, rng: &mut R) -> (NodeId, NodeId)
where
    R: Rng + ?Sized,
    F: Fn(NodeId, NodeId) -> bool,
{
    loop {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && !linked(u, v) {
            return (u, v);
        }
    }
}

/// Modified Watts–Strogatz two-layer graph.
pub fn generate_two_layer<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    rng: &mut R,
) -> Result<TwoLayerGraph, GeneratorError> {
    config.validate()?;
    if config.model != Model::ModifiedWs {
        return Err(GeneratorError::UnsupportedModel(config.model));
    }
    let n = config.node_count;
    let params = &config.model_params;
    let target_s = draw_target(config.strong_mean_degree_range, rng);
    let target_w = draw_target(config.weak_mean_degree_range, rng);
    let limit = n.saturating_sub(1) as f64;
    for target in [target_s, target_w, target_s + target_w] {
        if target >= limit {
            return Err(GeneratorError::InfeasibleTarget { target, node_count: n });
        }
    }
    let floor_need = params.weak_floor as f64 + target_s;
    if floor_need >= limit {
        return Err(GeneratorError::InfeasibleTarget { target: floor_need, node_count: n });
    }

    let mut g = TwoLayerGraph::new(n);
    let ring_s = ring_degree(target_s, params.ring_fraction, n);
    for d in 1..=ring_s / 2 {
        for i in 0..n {
            g.add_edge(i, (i + d) % n, Layer::Strong).expect("ring offsets are valid");
        }
    }
    let extra_s = shortcut_count(n, ring_s, target_s, params.shortcut_probability, rng);
    for _ in 0..extra_s {
        let (u, v) = random_free_pair(n, |u, v| g.has_link(u, v), rng);
        g.add_edge(u, v, Layer::Strong).expect("free pair");
    }

    // Weak ring on the offsets past the strong ring; pairs already taken by
    // strong shortcuts are replaced by random weak edges.
    let ring_w = ring_degree(target_w, params.ring_fraction, n.saturating_sub(ring_s));
    let mut displaced = 0usize;
    for d in (ring_s / 2 + 1)..=(ring_s / 2 + ring_w / 2) {
        for i in 0..n {
            let j = (i + d) % n;
            if i == j {
                continue;
            }
            match g.link(i, j) {
                Some(Layer::Strong) => displaced += 1,
                _ => {
                    g.add_edge(i, j, Layer::Weak).expect("no strong link");
                }
            }
        }
    }
    let extra_w = shortcut_count(n, ring_w, target_w, params.shortcut_probability, rng) + displaced;
    for _ in 0..extra_w {
        let (u, v) = random_free_pair(n, |u, v| g.has_link(u, v), rng);
        g.add_edge(u, v, Layer::Weak).expect("free pair");
    }

    for i in 0..n {
        while g.degree(i, Layer::Weak) < params.weak_floor {
            let free = n - 1 - g.degree(i, Layer::Weak) - g.degree(i, Layer::Strong);
            if free == 0 {
                return Err(GeneratorError::InfeasibleTarget {
                    target: params.weak_floor as f64,
                    node_count: n,
                });
            }
            let v = rng.random_range(0..n);
            if v != i && !g.has_link(i, v) {
                g.add_edge(i, v, Layer::Weak).expect("free pair");
            }
        }
    }
    Ok(g)
}

/// Single-layer graph of the configured family, targeting the weak degree range.
pub fn generate_single_layer<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    rng: &mut R,
) -> Result<SimpleGraph, GeneratorError> {
    config.validate()?;
    let n = config.node_count;
    let params = &config.model_params;
    let target = draw_target(config.weak_mean_degree_range, rng);
    let m = match config.model {
        Model::ModifiedWs => 0,
        Model::Rrt if !params.rrt_match_degree => params.attachment_count.unwrap_or(1),
        Model::Ba | Model::HolmeKim | Model::Rrt => params
            .attachment_count
            .unwrap_or_else(|| ((target / 2.0).round() as usize).max(1)),
    };
    let infeasible = match config.model {
        Model::ModifiedWs => target >= n.saturating_sub(1) as f64,
        _ => m >= n,
    };
    if infeasible {
        let target = if m > 0 { 2.0 * m as f64 } else { target };
        return Err(GeneratorError::InfeasibleTarget { target, node_count: n });
    }
    Ok(match config.model {
        Model::ModifiedWs => small_world(n, target, params, rng),
        Model::Ba => preferential_attachment(n, m, 0.0, rng),
        Model::HolmeKim => preferential_attachment(n, m, params.triad_probability, rng),
        Model::Rrt => uniform_attachment(n, m, rng),
    })
}

fn small_world<R: Rng + ?Sized>(n: usize, target: f64, params: &ModelParams, rng: &mut R) -> SimpleGraph {
    let mut g = SimpleGraph::new(n);
    let ring = ring_degree(target, params.ring_fraction, n);
    for d in 1..=ring / 2 {
        for i in 0..n {
            g.add_edge(i, (i + d) % n).expect("ring offsets are valid");
        }
    }
    for _ in 0..shortcut_count(n, ring, target, params.shortcut_probability, rng) {
        let (u, v) = random_free_pair(n, |u, v| g.has_edge(u, v), rng);
        g.add_edge(u, v).expect("free pair");
    }
    g
}

/// Barabási–Albert growth from an `m`-clique; with `triad_probability > 0`
/// each non-first link of an arrival closes a triangle with that
/// probability (Holme–Kim).
fn preferential_attachment<R: Rng + ?Sized>(n: usize, m: usize, triad_probability: f64, rng: &mut R) -> SimpleGraph {
    let mut g = SimpleGraph::new(n);
    // every endpoint of every edge, so a uniform pick is degree-proportional
    let mut endpoints: Vec<NodeId> = Vec::with_capacity(2 * m * n);
    for u in 0..m {
        for v in (u + 1)..m {
            g.add_edge(u, v).expect("seed clique");
            endpoints.extend([u, v]);
        }
    }
    let mut chosen: Vec<NodeId> = Vec::with_capacity(m);
    for t in m.max(1)..n {
        chosen.clear();
        let want = m.min(t);
        let mut last_pa: Option<NodeId> = None;
        while chosen.len() < want {
            if let Some(anchor) = last_pa.filter(|_| triad_probability > 0.0 && rng.random_bool(triad_probability)) {
                let candidates: Vec<NodeId> = g
                    .neighbors(anchor)
                    .iter()
                    .copied()
                    .filter(|w| !chosen.contains(w))
                    .collect();
                if !candidates.is_empty() {
                    chosen.push(candidates[rng.random_range(0..candidates.len())]);
                    continue;
                }
            }
            let pick = if endpoints.is_empty() {
                rng.random_range(0..t)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            if !chosen.contains(&pick) {
                chosen.push(pick);
                last_pa = Some(pick);
            }
        }
        for &w in &chosen {
            g.add_edge(t, w).expect("new node links to existing ones");
            endpoints.extend([t, w]);
        }
    }
    g
}

/// Recursive growth from a single node; each arrival links to `m` distinct
/// uniformly chosen earlier nodes (a random recursive tree when `m = 1`).
fn uniform_attachment<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> SimpleGraph {
    let mut g = SimpleGraph::new(n);
    for t in 1..n {
        for w in index::sample(rng, t, m.min(t)) {
            g.add_edge(t, w).expect("new node links to existing ones");
        }
    }
    g
}
