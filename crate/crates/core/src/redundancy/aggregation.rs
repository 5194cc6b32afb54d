use crate::graph::{Graph, NodeId};

use super::ReduceError;

/// A pair of nodes that appear together in the neighbor lists of `targets`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggEdge {
    /// Smaller endpoint.
    pub u: NodeId,
    /// Larger endpoint.
    pub v: NodeId,
    /// Aggregating nodes whose lists contain both `u` and `v`, ascending.
    pub targets: Vec<NodeId>,
}

impl AggEdge {
    pub fn weight(&self) -> usize {
        self.targets.len()
    }
}

/// Common-neighbor-pair graph. Only pairs shared by at least two targets are
/// kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationGraph {
    node_count: usize,
    /// Sorted by `(u, v)`.
    edges: Vec<AggEdge>,
}

impl AggregationGraph {
    /// Assembles an aggregation graph from explicit edges, checking the
    /// canonical-pair and weight invariants.
    pub fn from_edges(node_count: usize, mut edges: Vec<AggEdge>) -> Result<Self, ReduceError> {
        for e in &mut edges {
            if e.u >= e.v || e.v as usize >= node_count {
                return Err(ReduceError::Inconsistent(format!(
                    "pair ({}, {}) is not a canonical in-range pair",
                    e.u, e.v
                )));
            }
            e.targets.sort_unstable();
            e.targets.dedup();
            if e.weight() < 2 {
                return Err(ReduceError::Inconsistent(format!(
                    "pair ({}, {}) has weight {} < 2",
                    e.u,
                    e.v,
                    e.weight()
                )));
            }
        }
        edges.sort_by_key(|e| (e.u, e.v));
        if edges.windows(2).any(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(ReduceError::Inconsistent("duplicate pair".into()));
        }
        Ok(Self { node_count, edges })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[AggEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Looks up a pair in either orientation.
    pub fn get(&self, a: NodeId, b: NodeId) -> Option<&AggEdge> {
        let key = (a.min(b), a.max(b));
        self.edges
            .binary_search_by_key(&key, |e| (e.u, e.v))
            .ok()
            .map(|i| &self.edges[i])
    }

    pub fn weight(&self, a: NodeId, b: NodeId) -> usize {
        self.get(a, b).map_or(0, AggEdge::weight)
    }
}

/// Counts, for every unordered pair of sources, the targets that aggregate
/// both. `neigh(v)` is `v`'s list in `g` (its in-list when `g` is directed).
///
/// Targets whose list is longer than `degree_cap` are skipped; the pair count
/// grows quadratically in the degree.
pub fn build_aggregation_graph(g: &Graph, degree_cap: Option<usize>) -> AggregationGraph {
    let n = g.num_nodes();
    let mut entries: Vec<(u64, NodeId)> = Vec::new();
    for v in 0..n as NodeId {
        let list = g.neighbors(v);
        if list.len() < 2 || degree_cap.is_some_and(|cap| list.len() > cap) {
            continue;
        }
        for (i, &a) in list.iter().enumerate() {
            for &b in &list[i + 1..] {
                // Lists are sorted, so a < b is already canonical.
                entries.push((((a as u64) << 32) | b as u64, v));
            }
        }
    }
    // Targets were pushed in ascending order; a stable sort keeps them so.
    entries.sort_by_key(|&(key, _)| key);

    let mut edges = Vec::new();
    let mut i = 0;
    while i < entries.len() {
        let key = entries[i].0;
        let mut j = i;
        while j < entries.len() && entries[j].0 == key {
            j += 1;
        }
        if j - i >= 2 {
            edges.push(AggEdge {
                u: (key >> 32) as NodeId,
                v: (key & 0xffff_ffff) as NodeId,
                targets: entries[i..j].iter().map(|&(_, t)| t).collect(),
            });
        }
        i = j;
    }
    AggregationGraph {
        node_count: n,
        edges,
    }
}
