use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::graph::NodeId;

use super::{AggEdge, AggregationGraph};

/// Node-disjoint set of aggregation-graph edges, in extraction order
/// (non-increasing weight).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pub pairs: Vec<AggEdge>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total_weight(&self) -> usize {
        self.pairs.iter().map(AggEdge::weight).sum()
    }

    /// True when no node id occurs in two pairs.
    pub fn is_disjoint(&self) -> bool {
        let mut ids: Vec<NodeId> = self.pairs.iter().flat_map(|p| [p.u, p.v]).collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        ids.len() == n
    }
}

/// Greedy heaviest-first matching. Edges leave a max-heap in order of weight
/// (ties by smaller `u`, then smaller `v`); an edge is taken when both
/// endpoints are still free. Extraction stops once the heaviest remaining
/// weight is `<= theta`.
pub fn greedy_matching(ga: &AggregationGraph, theta: usize) -> Matching {
    let mut heap: BinaryHeap<(usize, Reverse<NodeId>, Reverse<NodeId>, usize)> = ga
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.weight(), Reverse(e.u), Reverse(e.v), i))
        .collect();
    let mut free = vec![true; ga.node_count()];
    let mut pairs = Vec::new();
    while let Some(&(w, _, _, idx)) = heap.peek() {
        if w <= theta {
            break;
        }
        heap.pop();
        let e = &ga.edges()[idx];
        let (u, v) = (e.u as usize, e.v as usize);
        if !(free[u] && free[v]) {
            continue;
        }
        free[u] = false;
        free[v] = false;
        pairs.push(e.clone());
    }
    Matching { pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::toy_subgraph;
    use crate::redundancy::build_aggregation_graph;
    use proptest::prelude::*;

    fn edge(u: u32, v: u32, w: usize) -> AggEdge {
        // Synthetic distinct targets; only the count matters here.
        AggEdge {
            u,
            v,
            targets: (100..100 + w as u32).collect(),
        }
    }

    #[test]
    fn toy_matching_by_threshold() {
        let ga = build_aggregation_graph(&toy_subgraph().local, None);
        let m = greedy_matching(&ga, 1);
        let pairs: Vec<_> = m.pairs.iter().map(|p| (p.u, p.v)).collect();
        assert_eq!(pairs, vec![(0, 2), (1, 3)]);
        assert!(greedy_matching(&ga, 2).is_empty());
    }

    #[test]
    fn triangle_keeps_only_heaviest() {
        let ga = AggregationGraph::from_edges(
            200,
            vec![edge(0, 1, 5), edge(1, 2, 4), edge(0, 2, 3)],
        )
        .unwrap();
        let m = greedy_matching(&ga, 1);
        let pairs: Vec<_> = m.pairs.iter().map(|p| (p.u, p.v)).collect();
        assert_eq!(pairs, vec![(0, 1)]);
    }

    #[test]
    fn ties_break_on_smaller_ids() {
        let ga = AggregationGraph::from_edges(
            200,
            vec![edge(2, 3, 4), edge(1, 3, 4), edge(1, 2, 4), edge(0, 5, 4)],
        )
        .unwrap();
        let pairs: Vec<_> = greedy_matching(&ga, 1)
            .pairs
            .iter()
            .map(|p| (p.u, p.v))
            .collect();
        assert_eq!(pairs, vec![(0, 5), (1, 2)]);
    }

    #[test]
    fn empty_graph_gives_empty_matching() {
        let ga = AggregationGraph::from_edges(3, vec![]).unwrap();
        assert!(greedy_matching(&ga, 1).is_empty());
    }

    /// Exhaustive best matching among edges heavier than theta.
    fn brute_force_best(edges: &[AggEdge], theta: usize) -> usize {
        let edges: Vec<_> = edges.iter().filter(|e| e.weight() > theta).collect();
        let mut best = 0;
        for mask in 0u32..(1 << edges.len()) {
            let chosen: Vec<_> = (0..edges.len()).filter(|i| mask >> i & 1 == 1).collect();
            let m = Matching {
                pairs: chosen.iter().map(|&i| edges[i].clone()).collect(),
            };
            if m.is_disjoint() {
                best = best.max(m.total_weight());
            }
        }
        best
    }

    proptest! {
        #[test]
        fn greedy_is_disjoint_maximal_and_half_optimal(
            raw in prop::collection::btree_map((0u32..8, 0u32..8), 2usize..9, 0..14),
            theta in 1usize..4,
        ) {
            let edges: Vec<_> = raw
                .into_iter()
                .filter(|((a, b), _)| a != b)
                .map(|((a, b), w)| ((a.min(b), a.max(b)), w))
                .collect::<std::collections::BTreeMap<_, _>>()
                .into_iter()
                .map(|((u, v), w)| edge(u, v, w))
                .collect();
            let ga = AggregationGraph::from_edges(200, edges.clone()).unwrap();
            let m = greedy_matching(&ga, theta);
            prop_assert!(m.is_disjoint());
            prop_assert!(m.pairs.iter().all(|p| p.weight() > theta));
            prop_assert!(m.pairs.windows(2).all(|w| w[0].weight() >= w[1].weight()));
            // Maximal: every remaining heavy edge touches a matched node.
            let used: Vec<u32> = m.pairs.iter().flat_map(|p| [p.u, p.v]).collect();
            for e in edges.iter().filter(|e| e.weight() > theta) {
                prop_assert!(used.contains(&e.u) || used.contains(&e.v));
            }
            // Greedy matching is a 1/2-approximation of the optimum.
            prop_assert!(2 * m.total_weight() >= brute_force_best(&edges, theta));
        }
    }
}
