use crate::graph::{Graph, NodeId};

use super::{Matching, ReduceError};

/// Rewrites `g` so that each matched pair `(u, v)` becomes a new node whose
/// feature is the precomputed sum of `u` and `v`. For every target `w` of the
/// pair, `u` and `v` leave `w`'s in-list and the new node joins it.
///
/// New nodes are numbered from `g.num_nodes()` in matching order. The result
/// is always directed (lists are in-lists).
pub fn apply_matching(g: &Graph, m: &Matching) -> Result<Graph, ReduceError> {
    if !m.is_disjoint() {
        return Err(ReduceError::Inconsistent("matching is not node-disjoint".into()));
    }
    let base = g.num_nodes();
    let mut lists = g.to_adjacency();
    for (i, pair) in m.pairs.iter().enumerate() {
        let merged = (base + i) as NodeId;
        for &w in &pair.targets {
            let list = lists
                .get_mut(w as usize)
                .ok_or(ReduceError::PairNotFound {
                    u: pair.u,
                    v: pair.v,
                    target: w,
                })?;
            let pu = list.binary_search(&pair.u);
            let pv = list.binary_search(&pair.v);
            let (Ok(pu), Ok(pv)) = (pu, pv) else {
                return Err(ReduceError::PairNotFound {
                    u: pair.u,
                    v: pair.v,
                    target: w,
                });
            };
            // pu < pv since u < v; remove the later index first.
            list.remove(pv);
            list.remove(pu);
            // `merged` exceeds every id already present, so order is kept.
            list.push(merged);
        }
    }
    lists.resize(base + m.len(), Vec::new());
    Ok(Graph::from_sorted_lists(lists, true))
}

/// The rewritten subgraph after one or more reduction rounds, together with
/// everything needed to aggregate features over it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSubgraph {
    graph: Graph,
    original_count: usize,
    rounds: Vec<Matching>,
    /// Constituents of merged node `original_count + i`.
    merged: Vec<[NodeId; 2]>,
    /// Degrees in the unreduced subgraph.
    degrees: Vec<u32>,
}

impl ReducedSubgraph {
    /// Zero-round reduction: aggregation over `g` as given.
    pub fn identity(g: &Graph) -> Self {
        Self {
            degrees: g.degrees(),
            original_count: g.num_nodes(),
            graph: g.clone().into_directed(),
            rounds: Vec::new(),
            merged: Vec::new(),
        }
    }

    /// Assembles a reduced subgraph and checks its structural invariants.
    pub fn from_parts(
        graph: Graph,
        original_count: usize,
        rounds: Vec<Matching>,
        degrees: Vec<u32>,
    ) -> Result<Self, ReduceError> {
        let merged: Vec<[NodeId; 2]> = rounds
            .iter()
            .flat_map(|m| m.pairs.iter().map(|p| [p.u, p.v]))
            .collect();
        let rs = Self {
            graph,
            original_count,
            rounds,
            merged,
            degrees,
        };
        rs.validate()?;
        Ok(rs)
    }

    fn validate(&self) -> Result<(), ReduceError> {
        let total = self.original_count + self.merged.len();
        if self.graph.num_nodes() != total {
            return Err(ReduceError::Inconsistent(format!(
                "graph has {} nodes, expected {total}",
                self.graph.num_nodes()
            )));
        }
        if self.degrees.len() != self.original_count {
            return Err(ReduceError::Inconsistent("degree vector length".into()));
        }
        // Round r may only reference nodes created before it.
        let mut created = self.original_count;
        for (r, m) in self.rounds.iter().enumerate() {
            for p in &m.pairs {
                if p.u as usize >= created || p.v as usize >= created {
                    return Err(ReduceError::Inconsistent(format!(
                        "round {} pair ({}, {}) references a node from a later round",
                        r + 1,
                        p.u,
                        p.v
                    )));
                }
            }
            created += m.len();
        }
        for k in self.original_count..total {
            if self.graph.degree(k as NodeId) != 0 {
                return Err(ReduceError::Inconsistent(format!(
                    "merged node {k} has an aggregation list"
                )));
            }
        }
        let sizes = self.expansion_sizes();
        for w in 0..self.original_count {
            let expanded: usize = self
                .graph
                .neighbors(w as NodeId)
                .iter()
                .map(|&x| sizes[x as usize])
                .sum();
            if expanded != self.degrees[w] as usize {
                return Err(ReduceError::Inconsistent(format!(
                    "node {w} expands to {expanded} sources, degree is {}",
                    self.degrees[w]
                )));
            }
        }
        Ok(())
    }

    /// Number of original nodes each node stands for.
    pub(crate) fn expansion_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![1usize; self.original_count];
        for &[a, b] in &self.merged {
            let s = sizes[a as usize] + sizes[b as usize];
            sizes.push(s);
        }
        sizes
    }

    /// The rewritten directed graph (original nodes first, merged nodes after).
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// |V_s|.
    pub fn original_count(&self) -> usize {
        self.original_count
    }

    pub fn rounds(&self) -> &[Matching] {
        &self.rounds
    }

    pub fn merged(&self) -> &[[NodeId; 2]] {
        &self.merged
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Σ over rounds of the matching size.
    pub fn matching_total(&self) -> usize {
        self.merged.len()
    }

    /// Replaces every merged node by its original constituents, recursively.
    pub fn expand(&self, node: NodeId, out: &mut Vec<NodeId>) {
        let k = node as usize;
        if k < self.original_count {
            out.push(node);
        } else {
            let [a, b] = self.merged[k - self.original_count];
            self.expand(a, out);
            self.expand(b, out);
        }
    }

    /// The original in-list of `w`, rebuilt from the rewritten structure.
    pub fn expanded_list(&self, w: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        for &x in self.graph.neighbors(w) {
            self.expand(x, &mut out);
        }
        out.sort_unstable();
        out
    }
}
