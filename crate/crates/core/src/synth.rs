//! Seeded synthetic graphs and datasets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::{Matrix, Scalar, Split};
use crate::graph::{Graph, NodeId};

/// Stochastic block model with equal-size contiguous blocks.
#[derive(Debug, Clone)]
pub struct PlantedPartition {
    pub graph: Graph,
    /// Block of each node.
    pub labels: Vec<u32>,
    pub blocks: usize,
}

pub fn planted_partition(n: usize, blocks: usize, p_in: f64, p_out: f64, seed: u64) -> PlantedPartition {
    assert!(blocks >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u32> = (0..n).map(|i| (i * blocks / n.max(1)) as u32).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((u as NodeId, v as NodeId));
            }
        }
    }
    let graph = Graph::from_edges(n, &edges, false).expect("ids in range").0;
    PlantedPartition { graph, labels, blocks }
}

/// One-hot block indicators of strength `signal`, followed by `extra_dims`
/// pure-noise columns, all with additive N(0, sigma²) noise.
pub fn block_features<T: Scalar>(
    labels: &[u32],
    blocks: usize,
    extra_dims: usize,
    signal: f64,
    sigma: f64,
    seed: u64,
) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let cols = blocks + extra_dims;
    Matrix::from_fn(labels.len(), cols, |r, c| {
        let base = if c == labels[r] as usize { signal } else { 0.0 };
        T::from_f64(base + noise.sample(&mut rng))
    })
}

/// Uniform random graph with about `n · mean_degree / 2` distinct edges.
pub fn random_graph(n: usize, mean_degree: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = (n as f64 * mean_degree / 2.0).round() as usize;
    let max_edges = n * n.saturating_sub(1) / 2;
    let target = target.min(max_edges);
    let mut edges = Vec::with_capacity(target);
    if n >= 2 {
        let mut seen = std::collections::HashSet::with_capacity(target);
        while seen.len() < target {
            let u = rng.gen_range(0..n as NodeId);
            let v = rng.gen_range(0..n as NodeId);
            if u != v && seen.insert((u.min(v), u.max(v))) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges, false).expect("ids in range").0
}

/// Shape of the common-neighbor-rich family: `groups` disjoint bicliques of
/// `hubs × targets`, plus sparse uniform noise edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommonNeighborParams {
    pub groups: usize,
    pub hubs: usize,
    pub targets: usize,
    /// Mean number of extra random edges per node.
    pub noise_degree: f64,
}

impl Default for CommonNeighborParams {
    fn default() -> Self {
        Self {
            groups: 20,
            hubs: 8,
            targets: 12,
            noise_degree: 1.0,
        }
    }
}

/// Every target of a group lists all of that group's hubs, so each hub pair
/// is shared by `targets` nodes and each target pair by `hubs` nodes. Node
/// ids are shuffled.
pub fn common_neighbor_family(p: &CommonNeighborParams, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = p.hubs + p.targets;
    let n = p.groups * size;
    let mut perm: Vec<NodeId> = (0..n as NodeId).collect();
    perm.shuffle(&mut rng);
    let mut edges = Vec::new();
    for g in 0..p.groups {
        let base = g * size;
        for h in 0..p.hubs {
            for t in 0..p.targets {
                edges.push((perm[base + h], perm[base + p.hubs + t]));
            }
        }
    }
    let noise = (n as f64 * p.noise_degree / 2.0).round() as usize;
    if n >= 2 {
        for _ in 0..noise {
            let u = rng.gen_range(0..n as NodeId);
            let v = rng.gen_range(0..n as NodeId);
            edges.push((u, v));
        }
    }
    // Self-loops and repeats from the noise are dropped here.
    Graph::from_edges(n, &edges, false).expect("ids in range").0
}

/// Shuffled split of `0..n` by fractions; the test set takes the remainder.
pub fn random_split(n: usize, train_frac: f64, val_frac: f64, seed: u64) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<NodeId> = (0..n as NodeId).collect();
    ids.shuffle(&mut rng);
    let n_train = (n as f64 * train_frac).round() as usize;
    let n_val = ((n as f64 * val_frac).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let mut train = ids[..n_train].to_vec();
    let mut val = ids[n_train..n_train + n_val].to_vec();
    let mut test = ids[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Split { train, val, test }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::mean_degree;

    #[test]
    fn planted_partition_is_assortative() {
        let pp = planted_partition(400, 4, 0.1, 0.005, 1);
        let (mut inside, mut across) = (0, 0);
        for (u, v) in pp.graph.edges() {
            if pp.labels[u as usize] == pp.labels[v as usize] {
                inside += 1;
            } else {
                across += 1;
            }
        }
        assert!(inside > 5 * across, "{inside} vs {across}");
        assert_eq!(pp.labels.iter().filter(|&&l| l == 3).count(), 100);
    }

    #[test]
    fn random_graph_hits_mean_degree() {
        let g = random_graph(1000, 10.0, 9);
        assert!((mean_degree(&g).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(random_graph(1000, 10.0, 9), g);
        assert_eq!(random_graph(3, 50.0, 0).num_edge_endpoints(), 6);
    }

    #[test]
    fn common_neighbor_family_shape() {
        let p = CommonNeighborParams {
            noise_degree: 0.0,
            ..Default::default()
        };
        let g = common_neighbor_family(&p, 3);
        assert_eq!(g.num_nodes(), 400);
        assert_eq!(g.num_edge_endpoints(), 2 * 20 * 8 * 12);
    }

    #[test]
    fn features_carry_the_label() {
        let labels = vec![0, 1, 2, 1];
        let x: Matrix<f64> = block_features(&labels, 3, 2, 1.0, 0.0, 0);
        assert_eq!(x.shape(), (4, 5));
        assert_eq!(x.argmax_rows(), vec![0, 1, 2, 1]);
    }

    #[test]
    fn split_partitions_ids() {
        let s = random_split(100, 0.6, 0.2, 4);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
        let mut all: Vec<_> = [s.train, s.val, s.test].concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
