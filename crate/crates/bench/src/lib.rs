//! Shared inputs for the benchmarks.

use gcnpipe_core::engine::Matrix;
use gcnpipe_core::redundancy::ReducedSubgraph;
use gcnpipe_core::synth;
use gcnpipe_core::{reduce, Graph, ReduceConfig};

/// Random graph with `n` nodes and mean degree `d_bar`.
pub fn graph(n: usize, d_bar: f64) -> Graph {
    synth::random_graph(n, d_bar, 7)
}

/// Common-neighbor-rich graph, where reduction pays off.
pub fn redundant_graph(seed: u64) -> Graph {
    synth::common_neighbor_family(&synth::CommonNeighborParams::default(), seed)
}

pub fn features(rows: usize, cols: usize) -> Matrix<f32> {
    Matrix::from_fn(rows, cols, |r, c| ((r * 31 + c * 7) % 97) as f32 / 97.0)
}

/// `(unreduced, reduced)` views of `g`.
pub fn reduced_pair(g: &Graph, rounds: usize) -> (ReducedSubgraph, ReducedSubgraph) {
    let cfg = ReduceConfig {
        max_rounds: rounds,
        ..Default::default()
    };
    let (rs, _) = reduce(g, &cfg).expect("reduce");
    (ReducedSubgraph::identity(g), rs)
}
