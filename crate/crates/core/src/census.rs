//! Triangle and open-triad counts by link-type composition.
//!
//! A triad is an ego with two of its neighbors; it is open when the two
//! neighbors share no link in either layer. Over a full graph the counts obey
//!
//! ```text
//! Σ C(k_s, 2) = l_ss + 3 t_s3 + t_s2w
//! Σ k_s k_w   = l_sw + 2 t_s2w + 2 t_sw2
//! Σ C(k_w, 2) = l_ww + 3 t_w3 + t_sw2
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{forward_lists, Layer, NodeId, TwoLayerGraph};

/// Triangle counts indexed by composition: `[s³, s²w, sw², w³]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleCounts {
    pub s3: u64,
    pub s2w: u64,
    pub sw2: u64,
    pub w3: u64,
}

impl TriangleCounts {
    pub fn as_array(&self) -> [u64; 4] {
        [self.s3, self.s2w, self.sw2, self.w3]
    }

    pub fn total(&self) -> u64 {
        self.as_array().iter().sum()
    }

    fn from_array(a: [u64; 4]) -> Self {
        TriangleCounts { s3: a[0], s2w: a[1], sw2: a[2], w3: a[3] }
    }
}

/// Triad counts indexed by the composition of the two ego links: `[ss, sw, ww]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriadCounts {
    pub ss: u64,
    pub sw: u64,
    pub ww: u64,
}

impl TriadCounts {
    pub fn as_array(&self) -> [u64; 3] {
        [self.ss, self.sw, self.ww]
    }

    pub fn total(&self) -> u64 {
        self.ss + self.sw + self.ww
    }

    fn from_array(a: [u64; 3]) -> Self {
        TriadCounts { ss: a[0], sw: a[1], ww: a[2] }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifCensus {
    pub triangles: TriangleCounts,
    pub open_triads: TriadCounts,
}

impl MotifCensus {
    pub fn of(g: &TwoLayerGraph) -> Self {
        MotifCensus { triangles: triangle_census(g), open_triads: open_triad_census(g) }
    }

    /// Total triads implied by the census through the composition identities.
    pub fn implied_triad_totals(&self) -> TriadCounts {
        let t = &self.triangles;
        let l = &self.open_triads;
        TriadCounts {
            ss: l.ss + 3 * t.s3 + t.s2w,
            sw: l.sw + 2 * t.s2w + 2 * t.sw2,
            ww: l.ww + 3 * t.w3 + t.sw2,
        }
    }
}

fn strong_count(layers: [Layer; 3]) -> usize {
    layers.iter().filter(|&&l| l == Layer::Strong).count()
}

/// Index into `[s³, s²w, sw², w³]` for a triangle with the given link layers.
fn triangle_slot(layers: [Layer; 3]) -> usize {
    3 - strong_count(layers)
}

/// Index into `[ss, sw, ww]` for the two ego-incident links.
fn triad_slot(a: Layer, b: Layer) -> usize {
    match (a, b) {
        (Layer::Strong, Layer::Strong) => 0,
        (Layer::Weak, Layer::Weak) => 2,
        _ => 1,
    }
}

/// Counts each triangle once, classified by its multiset of link types.
pub fn triangle_census(g: &TwoLayerGraph) -> TriangleCounts {
    let forward = forward_lists(g.node_count(), |u| g.typed_neighbors(u).into_iter());
    let counts = (0..g.node_count())
        .into_par_iter()
        .map(|u| {
            let mut acc = [0u64; 4];
            let fu = &forward[u];
            for &(v, l_uv) in fu {
                let fv = &forward[v];
                let (mut i, mut j) = (0, 0);
                while i < fu.len() && j < fv.len() {
                    match fu[i].0.cmp(&fv[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            acc[triangle_slot([l_uv, fu[i].1, fv[j].1])] += 1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
            }
            acc
        })
        .reduce(|| [0u64; 4], add4);
    TriangleCounts::from_array(counts)
}

fn add4(a: [u64; 4], b: [u64; 4]) -> [u64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn add3(a: [u64; 3], b: [u64; 3]) -> [u64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Counts, for every ego, the unordered neighbor pairs with no link between
/// them, classified by the two ego-incident link types.
pub fn open_triad_census(g: &TwoLayerGraph) -> TriadCounts {
    let typed: Vec<Vec<(NodeId, Layer)>> = (0..g.node_count()).map(|u| g.typed_neighbors(u)).collect();
    let counts = (0..g.node_count())
        .into_par_iter()
        .map(|x| {
            let mut acc = [0u64; 3];
            let nx = &typed[x];
            for (i, &(y, l_xy)) in nx.iter().enumerate() {
                let rest = &nx[i + 1..];
                let ny = &typed[y];
                let mut j = 0;
                for &(z, l_xz) in rest {
                    while j < ny.len() && ny[j].0 < z {
                        j += 1;
                    }
                    if j == ny.len() || ny[j].0 != z {
                        acc[triad_slot(l_xy, l_xz)] += 1;
                    }
                }
            }
            acc
        })
        .reduce(|| [0u64; 3], add3);
    TriadCounts::from_array(counts)
}

/// Exact triad totals `(Σ C(k_s,2), Σ k_s k_w, Σ C(k_w,2))` from the degrees.
pub fn triad_totals_from_degrees(g: &TwoLayerGraph) -> TriadCounts {
    let mut acc = [0u64; 3];
    for i in 0..g.node_count() {
        let ks = g.degree(i, Layer::Strong) as u64;
        let kw = g.degree(i, Layer::Weak) as u64;
        acc[0] += ks * ks.saturating_sub(1) / 2;
        acc[1] += ks * kw;
        acc[2] += kw * kw.saturating_sub(1) / 2;
    }
    TriadCounts::from_array(acc)
}
