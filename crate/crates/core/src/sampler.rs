//! Fixed-choice ego-centric survey simulation.
//!
//! Every node is a seed independently with probability `q`. A seed names all
//! of its strong neighbors and a uniformly random `B`-subset of its weak
//! neighbors. The observed network keeps, per link, which endpoints named it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Layer, NodeId, TwoLayerGraph};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsufficientWeakPolicy {
    /// A seed with fewer than `B` weak ties is an error.
    #[default]
    Error,
    /// Such a seed names all of its weak ties.
    ReportAll,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub q: f64,
    #[serde(rename = "B")]
    pub budget: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub insufficient_weak_policy: InsufficientWeakPolicy,
}

impl SamplingConfig {
    pub fn new(q: f64, budget: usize) -> Self {
        SamplingConfig { q, budget, rng_seed: 0, insufficient_weak_policy: InsufficientWeakPolicy::Error }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(SamplingError::InvalidConfig(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if self.budget == 0 {
            return Err(SamplingError::InvalidConfig("B must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
    #[error("node {0} has fewer weak ties than the naming budget")]
    InsufficientWeakTies(NodeId),
    #[error("no seeds were drawn")]
    DegenerateSample,
    #[error("node {0} is not a respondent")]
    NotASeed(NodeId),
    #[error("invalid survey: {0}")]
    InvalidSurvey(String),
}

/// One report: seed `namer` names `alter` as a tie of type `layer`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Naming {
    pub namer: NodeId,
    pub alter: NodeId,
    pub layer: Layer,
}

/// Which endpoints of a link `(u, v)`, `u < v`, named it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NamedBy {
    pub by_u: bool,
    pub by_v: bool,
}

impl NamedBy {
    pub fn is_empty(&self) -> bool {
        !self.by_u && !self.by_v
    }

    pub fn both(&self) -> bool {
        self.by_u && self.by_v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservedLink {
    pub u: NodeId,
    pub v: NodeId,
    pub layer: Layer,
    pub named_by: NamedBy,
}

impl ObservedLink {
    pub fn namers(&self) -> impl Iterator<Item = NodeId> + '_ {
        [(self.named_by.by_u, self.u), (self.named_by.by_v, self.v)]
            .into_iter()
            .filter_map(|(named, id)| named.then_some(id))
    }
}

/// The seven scalar survey statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observables {
    pub n0: u64,
    pub n1s: u64,
    pub n1w: u64,
    pub m0s: u64,
    pub m1s: u64,
    pub m0w: u64,
    pub m1w: u64,
}

/// The sampled subgraph: seeds, typed links and their naming directions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedNetwork {
    source_node_count: Option<usize>,
    budget: usize,
    seeds: Vec<NodeId>,
    links: Vec<ObservedLink>,
    strong_alters: Vec<NodeId>,
    weak_alters: Vec<NodeId>,
}

impl ObservedNetwork {
    /// Assembles an observed network from naming events. A strong link
    /// between two seeds counts as named from both sides.
    pub fn from_namings(
        seeds: impl IntoIterator<Item = NodeId>,
        namings: impl IntoIterator<Item = Naming>,
        budget: usize,
        source_node_count: Option<usize>,
    ) -> Result<Self, SamplingError> {
        let seeds: BTreeSet<NodeId> = seeds.into_iter().collect();
        let mut by_pair: BTreeMap<(NodeId, NodeId), (Layer, NamedBy)> = BTreeMap::new();
        for Naming { namer, alter, layer } in namings {
            if !seeds.contains(&namer) {
                return Err(SamplingError::InvalidSurvey(format!("namer {namer} is not a respondent")));
            }
            if namer == alter {
                return Err(SamplingError::InvalidSurvey(format!("respondent {namer} names itself")));
            }
            let key = (namer.min(alter), namer.max(alter));
            let entry = by_pair.entry(key).or_insert((layer, NamedBy::default()));
            if entry.0 != layer {
                return Err(SamplingError::InvalidSurvey(format!(
                    "pair ({}, {}) reported as both strong and weak",
                    key.0, key.1
                )));
            }
            if namer == key.0 {
                entry.1.by_u = true;
            } else {
                entry.1.by_v = true;
            }
        }
        let links = by_pair
            .into_iter()
            .map(|((u, v), (layer, mut named_by))| {
                if layer == Layer::Strong && seeds.contains(&u) && seeds.contains(&v) {
                    named_by = NamedBy { by_u: true, by_v: true };
                }
                ObservedLink { u, v, layer, named_by }
            })
            .collect();
        Ok(Self::assemble(source_node_count, budget, seeds.into_iter().collect(), links))
    }

    fn assemble(
        source_node_count: Option<usize>,
        budget: usize,
        seeds: Vec<NodeId>,
        links: Vec<ObservedLink>,
    ) -> Self {
        let mut strong_alters = BTreeSet::new();
        let mut weak_alters = BTreeSet::new();
        for link in &links {
            let alters = match link.layer {
                Layer::Strong => &mut strong_alters,
                Layer::Weak => &mut weak_alters,
            };
            for end in [link.u, link.v] {
                if seeds.binary_search(&end).is_err() {
                    alters.insert(end);
                }
            }
        }
        ObservedNetwork {
            source_node_count,
            budget,
            seeds,
            links,
            strong_alters: strong_alters.into_iter().collect(),
            weak_alters: weak_alters.into_iter().collect(),
        }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Size of the surveyed population, when known. Estimators never read it.
    pub fn source_node_count(&self) -> Option<usize> {
        self.source_node_count
    }

    pub fn seeds(&self) -> &[NodeId] {
        &self.seeds
    }

    pub fn is_seed(&self, node: NodeId) -> bool {
        self.seeds.binary_search(&node).is_ok()
    }

    pub fn links(&self) -> &[ObservedLink] {
        &self.links
    }

    pub fn strong_alters(&self) -> &[NodeId] {
        &self.strong_alters
    }

    pub fn weak_alters(&self) -> &[NodeId] {
        &self.weak_alters
    }

    /// All naming events, ordered by `(namer, alter)`.
    pub fn namings(&self) -> Vec<Naming> {
        let mut out: Vec<Naming> = self
            .links
            .iter()
            .flat_map(|l| {
                l.namers().map(move |namer| Naming {
                    namer,
                    alter: if namer == l.u { l.v } else { l.u },
                    layer: l.layer,
                })
            })
            .collect();
        out.sort();
        out
    }

    pub fn observables(&self) -> Observables {
        let mut obs = Observables {
            n0: self.seeds.len() as u64,
            n1s: self.strong_alters.len() as u64,
            n1w: self.weak_alters.len() as u64,
            ..Default::default()
        };
        for link in &self.links {
            let internal = self.is_seed(link.u) && self.is_seed(link.v);
            let slot = match (link.layer, internal) {
                (Layer::Strong, true) => &mut obs.m0s,
                (Layer::Strong, false) => &mut obs.m1s,
                (Layer::Weak, true) => &mut obs.m0w,
                (Layer::Weak, false) => &mut obs.m1w,
            };
            *slot += 1;
        }
        obs
    }

    /// Drops respondent `r`: its naming events go, links nobody else named
    /// go, and `r` becomes an ordinary alter wherever another seed named it.
    pub fn remove_respondent(&self, r: NodeId) -> Result<ObservedNetwork, SamplingError> {
        let pos = self.seeds.binary_search(&r).map_err(|_| SamplingError::NotASeed(r))?;
        let mut seeds = self.seeds.clone();
        seeds.remove(pos);
        let links = self
            .links
            .iter()
            .filter_map(|link| {
                let mut link = *link;
                if link.u == r {
                    link.named_by.by_u = false;
                }
                if link.v == r {
                    link.named_by.by_v = false;
                }
                (!link.named_by.is_empty()).then_some(link)
            })
            .collect();
        Ok(Self::assemble(self.source_node_count, self.budget, seeds, links))
    }

    /// Every node appearing in the observed network, ascending.
    pub fn node_ids(&self) -> Vec<NodeId> {
        let mut ids: BTreeSet<NodeId> = self.seeds.iter().copied().collect();
        for link in &self.links {
            ids.insert(link.u);
            ids.insert(link.v);
        }
        ids.into_iter().collect()
    }

    /// The observed network as an undirected typed graph over compacted ids.
    /// Returns the graph and the original id of each compacted node.
    pub fn typed_graph(&self) -> (TwoLayerGraph, Vec<NodeId>) {
        let ids = self.node_ids();
        let mut g = TwoLayerGraph::new(ids.len());
        let local = |id: NodeId| ids.binary_search(&id).expect("link endpoint is a known node");
        for link in &self.links {
            g.add_edge(local(link.u), local(link.v), link.layer)
                .expect("observed links are unique per pair");
        }
        (g, ids)
    }

    pub fn to_survey(&self) -> SurveyExport {
        let mut per_seed: BTreeMap<NodeId, Respondent> = self
            .seeds
            .iter()
            .map(|&id| (id, Respondent { id, strong: Vec::new(), weak: Vec::new() }))
            .collect();
        for naming in self.namings() {
            let r = per_seed.get_mut(&naming.namer).expect("namers are seeds");
            match naming.layer {
                Layer::Strong => r.strong.push(naming.alter),
                Layer::Weak => r.weak.push(naming.alter),
            }
        }
        SurveyExport { budget: self.budget, respondents: per_seed.into_values().collect() }
    }

    pub fn from_survey(survey: &SurveyExport) -> Result<Self, SamplingError> {
        if survey.budget == 0 {
            return Err(SamplingError::InvalidSurvey("B must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        let mut namings = Vec::new();
        for r in &survey.respondents {
            if !seen.insert(r.id) {
                return Err(SamplingError::InvalidSurvey(format!("respondent {} listed twice", r.id)));
            }
            let weak: BTreeSet<NodeId> = r.weak.iter().copied().collect();
            if weak.len() > survey.budget {
                return Err(SamplingError::InvalidSurvey(format!(
                    "respondent {} names {} weak ties, above B = {}",
                    r.id,
                    weak.len(),
                    survey.budget
                )));
            }
            let strong: BTreeSet<NodeId> = r.strong.iter().copied().collect();
            namings.extend(strong.into_iter().map(|alter| Naming { namer: r.id, alter, layer: Layer::Strong }));
            namings.extend(weak.into_iter().map(|alter| Naming { namer: r.id, alter, layer: Layer::Weak }));
        }
        Self::from_namings(seen, namings, survey.budget, None)
    }
}

/// Survey exchange document: `{"B": int, "respondents": [{"id", "strong", "weak"}]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyExport {
    #[serde(rename = "B")]
    pub budget: usize,
    pub respondents: Vec<Respondent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Respondent {
    pub id: NodeId,
    #[serde(default)]
    pub strong: Vec<NodeId>,
    #[serde(default)]
    pub weak: Vec<NodeId>,
}

/// Runs one fixed-choice survey over `graph`.
pub fn conduct_survey<R: Rng + ?Sized>(
    graph: &TwoLayerGraph,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<ObservedNetwork, SamplingError> {
    config.validate()?;
    let seeds: Vec<NodeId> = (0..graph.node_count()).filter(|_| rng.random_bool(config.q)).collect();
    if seeds.is_empty() {
        return Err(SamplingError::DegenerateSample);
    }
    let mut namings = Vec::new();
    for &seed in &seeds {
        for &alter in graph.neighbors(seed, Layer::Strong) {
            namings.push(Naming { namer: seed, alter, layer: Layer::Strong });
        }
        let weak = graph.neighbors(seed, Layer::Weak);
        if weak.len() < config.budget {
            match config.insufficient_weak_policy {
                InsufficientWeakPolicy::Error => return Err(SamplingError::InsufficientWeakTies(seed)),
                InsufficientWeakPolicy::ReportAll => {
                    namings.extend(weak.iter().map(|&alter| Naming { namer: seed, alter, layer: Layer::Weak }));
                }
            }
        } else {
            for i in index::sample(rng, weak.len(), config.budget) {
                namings.push(Naming { namer: seed, alter: weak[i], layer: Layer::Weak });
            }
        }
    }
    ObservedNetwork::from_namings(seeds, namings, config.budget, Some(graph.node_count()))
}
