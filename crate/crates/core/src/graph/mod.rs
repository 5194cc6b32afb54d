//! Compressed sparse graphs, induced subgraphs and minibatch samplers.
//!
//! A [`Graph`] stores one sorted neighbor list per node in CSR form. For an
//! undirected graph the lists are symmetric. For a directed graph the list of
//! node `v` holds the nodes whose features `v` aggregates (its in-list), which
//! is the orientation produced by the redundancy-reduction rewrite.

pub(crate) mod io;
mod sample;

pub use io::{
    load_graph, read_binary, read_edge_list, save_graph, write_binary, write_edge_list,
    EdgeListOptions, GraphFormat, LoadReport,
};
pub use sample::{sample_subgraph, Sampler, SamplerConfig, SamplerMethod};

use thiserror::Error;

/// Dense 0-based node identifier.
pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node id {id} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { id: u64, num_nodes: usize },
    #[error("node id {0} does not fit in 32 bits")]
    IdOverflow(u64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("malformed binary graph: {0}")]
    Binary(String),
    #[error("invalid graph structure: {0}")]
    Invalid(String),
    #[error("graph has no nodes")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Counts of input edges discarded while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Immutable CSR adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    directed: bool,
}

impl Graph {
    /// A graph with `num_nodes` isolated nodes.
    pub fn empty(num_nodes: usize, directed: bool) -> Self {
        Self {
            offsets: vec![0; num_nodes + 1],
            neighbors: Vec::new(),
            directed,
        }
    }

    /// Builds a graph from an edge list. Undirected inputs are symmetrized;
    /// self-loops and repeated edges are dropped and counted.
    ///
    /// For `directed = true` an edge `(u, v)` means `v` aggregates `u`, i.e.
    /// `u` is placed in `v`'s list.
    pub fn from_edges(
        num_nodes: usize,
        edges: &[(NodeId, NodeId)],
        directed: bool,
    ) -> Result<(Self, BuildStats), GraphError> {
        let mut stats = BuildStats::default();
        let mut lists: Vec<Vec<NodeId>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            for id in [u, v] {
                if id as usize >= num_nodes {
                    return Err(GraphError::NodeOutOfRange {
                        id: id as u64,
                        num_nodes,
                    });
                }
            }
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            lists[v as usize].push(u);
            if !directed {
                lists[u as usize].push(v);
            }
        }
        let mut removed = 0;
        for list in &mut lists {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            removed += before - list.len();
        }
        // In the undirected case every duplicate shows up in both lists.
        stats.duplicates_dropped = if directed { removed } else { removed / 2 };
        Ok((Self::from_sorted_lists(lists, directed), stats))
    }

    /// Builds a graph from per-node lists, validating every invariant.
    pub fn from_adjacency(lists: Vec<Vec<NodeId>>, directed: bool) -> Result<Self, GraphError> {
        let n = lists.len();
        for (v, list) in lists.iter().enumerate() {
            for w in list.windows(2) {
                if w[0] >= w[1] {
                    return Err(GraphError::Invalid(format!(
                        "neighbor list of {v} is not strictly increasing"
                    )));
                }
            }
            if let Some(&last) = list.last() {
                if last as usize >= n {
                    return Err(GraphError::NodeOutOfRange {
                        id: last as u64,
                        num_nodes: n,
                    });
                }
            }
            if list.binary_search(&(v as NodeId)).is_ok() {
                return Err(GraphError::Invalid(format!("self loop on node {v}")));
            }
        }
        let g = Self::from_sorted_lists(lists, directed);
        if !directed {
            g.check_symmetric()?;
        }
        Ok(g)
    }

    /// Assembles CSR arrays from lists the caller guarantees are valid.
    pub(crate) fn from_sorted_lists(lists: Vec<Vec<NodeId>>, directed: bool) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let total: usize = lists.iter().map(Vec::len).sum();
        let mut neighbors = Vec::with_capacity(total);
        for list in lists {
            neighbors.extend_from_slice(&list);
            offsets.push(neighbors.len());
        }
        Self {
            offsets,
            neighbors,
            directed,
        }
    }

    /// Builds from raw CSR arrays (used by the binary reader).
    pub(crate) fn from_csr(
        offsets: Vec<usize>,
        neighbors: Vec<NodeId>,
        directed: bool,
    ) -> Result<Self, GraphError> {
        if offsets.first() != Some(&0) {
            return Err(GraphError::Invalid("first offset must be 0".into()));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(GraphError::Invalid("offsets decrease".into()));
        }
        if *offsets.last().unwrap() != neighbors.len() {
            return Err(GraphError::Invalid(
                "last offset does not match neighbor count".into(),
            ));
        }
        let lists = offsets
            .windows(2)
            .map(|w| neighbors[w[0]..w[1]].to_vec())
            .collect();
        Self::from_adjacency(lists, directed)
    }

    fn check_symmetric(&self) -> Result<(), GraphError> {
        for v in 0..self.num_nodes() {
            for &u in self.neighbors(v as NodeId) {
                if !self.has_edge(v as NodeId, u) {
                    return Err(GraphError::Invalid(format!(
                        "undirected graph has ({u},{v}) but not ({v},{u})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total length of all neighbor lists (twice the edge count when undirected).
    pub fn num_edge_endpoints(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.offsets.windows(2).map(|w| (w[1] - w[0]) as u32).collect()
    }

    /// True when `u` is in `v`'s list.
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        (v as usize) < self.num_nodes() && self.neighbors(v).binary_search(&u).is_ok()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbor_ids(&self) -> &[NodeId] {
        &self.neighbors
    }

    /// Copies the neighbor lists out for mutation.
    pub fn to_adjacency(&self) -> Vec<Vec<NodeId>> {
        (0..self.num_nodes())
            .map(|v| self.neighbors(v as NodeId).to_vec())
            .collect()
    }

    /// The same lists, relabelled as a directed (in-list) graph.
    pub fn into_directed(mut self) -> Self {
        self.directed = true;
        self
    }

    /// Undirected edges as `(u, v)` with `u < v`; for directed graphs every
    /// `(source, target)` pair.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for v in 0..self.num_nodes() as NodeId {
            for &u in self.neighbors(v) {
                if self.directed || u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// An induced subgraph with its mapping back to the parent graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub local: Graph,
    /// `parent_ids[local] = parent node id`, strictly increasing.
    pub parent_ids: Vec<NodeId>,
}

impl Subgraph {
    /// Wraps a whole graph as its own subgraph (identity mapping).
    pub fn whole(g: &Graph) -> Self {
        Self {
            local: g.clone(),
            parent_ids: (0..g.num_nodes() as NodeId).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.local.num_nodes()
    }

    pub fn is_empty(&self) -> bool {
        self.parent_ids.is_empty()
    }
}

/// Induced subgraph over `nodes` (duplicates ignored). Local ids follow
/// ascending parent id.
pub fn induced_subgraph(g: &Graph, nodes: &[NodeId]) -> Result<Subgraph, GraphError> {
    let mut ids = nodes.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if let Some(&max) = ids.last() {
        if max as usize >= g.num_nodes() {
            return Err(GraphError::NodeOutOfRange {
                id: max as u64,
                num_nodes: g.num_nodes(),
            });
        }
    }
    // Local ids are ranks in `ids`, so sorted parent lists map to sorted local lists.
    let lists = ids
        .iter()
        .map(|&p| {
            g.neighbors(p)
                .iter()
                .filter_map(|u| ids.binary_search(u).ok().map(|i| i as NodeId))
                .collect()
        })
        .collect();
    Ok(Subgraph {
        local: Graph::from_sorted_lists(lists, g.is_directed()),
        parent_ids: ids,
    })
}

/// Average node degree.
pub fn mean_degree(g: &Graph) -> Result<f64, GraphError> {
    if g.num_nodes() == 0 {
        return Err(GraphError::Empty);
    }
    Ok(g.num_edge_endpoints() as f64 / g.num_nodes() as f64)
}
