//! Deliberately naive reference implementations used to check the fast
//! paths: direct aggregation, loop-based layers and loss, finite
//! differences, and operation counting for pair reuse.

use crate::engine::{backward, forward, GcnModel, LabeledRows, LayerWeights, Matrix, Scalar};
use crate::graph::{Graph, NodeId};
use crate::redundancy::{Matching, ReducedSubgraph};

/// `D⁻¹AX` straight from the in-lists; isolated rows stay zero.
pub fn mean_aggregate<T: Scalar>(g: &Graph, x: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(g.num_nodes(), x.cols());
    for v in 0..g.num_nodes() {
        let nb = g.neighbors(v as NodeId);
        if nb.is_empty() {
            continue;
        }
        for c in 0..x.cols() {
            let mut s = 0.0f64;
            for &u in nb {
                s += x.get(u as usize, c).to_f64();
            }
            out.set(v, c, T::from_f64(s / nb.len() as f64));
        }
    }
    out
}

/// `(D⁻¹A)ᵀX`: each node sends `x_v / d_v` to its in-neighbors.
pub fn transpose_mean_aggregate<T: Scalar>(g: &Graph, x: &Matrix<T>) -> Matrix<T> {
    let mut acc = vec![0.0f64; g.num_nodes() * x.cols()];
    for v in 0..g.num_nodes() {
        let nb = g.neighbors(v as NodeId);
        for &u in nb {
            for c in 0..x.cols() {
                acc[u as usize * x.cols() + c] += x.get(v, c).to_f64() / nb.len() as f64;
            }
        }
    }
    Matrix::from_vec(g.num_nodes(), x.cols(), acc.into_iter().map(T::from_f64).collect()).unwrap()
}

fn dot_col<T: Scalar>(x: &Matrix<T>, r: usize, w: &Matrix<T>, c: usize) -> f64 {
    (0..x.cols()).map(|k| x.get(r, k).to_f64() * w.get(k, c).to_f64()).sum()
}

/// Pre-activations `[x·W_self | agg·W_neigh]` by explicit loops.
fn naive_preact<T: Scalar>(x: &Matrix<T>, agg: &Matrix<T>, layer: &LayerWeights<T>) -> Vec<Vec<f64>> {
    let hs = layer.w_self.cols();
    (0..x.rows())
        .map(|r| {
            let mut row: Vec<f64> = (0..hs).map(|c| dot_col(x, r, &layer.w_self, c)).collect();
            row.extend((0..layer.w_neigh.cols()).map(|c| dot_col(agg, r, &layer.w_neigh, c)));
            row
        })
        .collect()
}

fn relu_rows<T: Scalar>(pre: &[Vec<f64>]) -> Matrix<T> {
    let cols = pre.first().map_or(0, Vec::len);
    Matrix::from_fn(pre.len(), cols, |r, c| T::from_f64(pre[r][c].max(0.0)))
}

pub fn naive_layer<T: Scalar>(x: &Matrix<T>, agg: &Matrix<T>, layer: &LayerWeights<T>) -> Matrix<T> {
    relu_rows(&naive_preact(x, agg, layer))
}

/// Loss and the sign of every ReLU input, with nothing shared with the
/// engine beyond the weight containers.
fn naive_forward(model: &GcnModel<f64>, g: &Graph, x: &Matrix<f64>, labeled: &LabeledRows) -> (f64, Vec<bool>) {
    let mut signs = Vec::new();
    let mut h = x.clone();
    for layer in &model.layers {
        let agg = mean_aggregate(g, &h);
        let pre = naive_preact(&h, &agg, layer);
        signs.extend(pre.iter().flatten().map(|&v| v > 0.0));
        h = relu_rows(&pre);
    }
    let mut loss = 0.0;
    for &(r, class) in labeled {
        let z: Vec<f64> = (0..model.mlp.cols())
            .map(|c| dot_col(&h, r, &model.mlp, c))
            .collect();
        signs.extend(z.iter().map(|&v| v > 0.0));
        let z: Vec<f64> = z.into_iter().map(|v| v.max(0.0)).collect();
        let norm: f64 = z.iter().map(|v| v.exp()).sum::<f64>().ln();
        loss += norm - z[class as usize];
    }
    (loss / labeled.len() as f64, signs)
}

pub fn scalar_loss(model: &GcnModel<f64>, g: &Graph, x: &Matrix<f64>, labeled: &LabeledRows) -> f64 {
    naive_forward(model, g, x, labeled).0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Parameters whose ±h perturbation flips a ReLU.
    pub skipped: usize,
    /// ReLU units that were inactive at the base point.
    pub clipped_units: usize,
}

/// Central finite differences of the naive loss against the engine's
/// analytic gradient, for every weight.
pub fn finite_difference_check(
    model: &GcnModel<f64>,
    g: &Graph,
    x: &Matrix<f64>,
    labeled: &LabeledRows,
    h: f64,
    floor: f64,
) -> FdReport {
    let rs = ReducedSubgraph::identity(g);
    let (tape, loss) = forward(model, &rs, x, Some(labeled)).expect("forward");
    let grads = backward(model, &rs, &tape, &loss.expect("labels").grad_wrt_logits).expect("backward");
    let (_, base_signs) = naive_forward(model, g, x, labeled);
    let mut report = FdReport {
        max_rel_err: 0.0,
        checked: 0,
        skipped: 0,
        clipped_units: base_signs.iter().filter(|s| !**s).count(),
    };
    let mut probe = model.clone();
    let analytic: Vec<Vec<f64>> = grads.params().iter().map(|m| m.as_slice().to_vec()).collect();
    for (p, grad) in analytic.iter().enumerate() {
        for i in 0..grad.len() {
            let orig = probe.params()[p].as_slice()[i];
            let mut eval = |v: f64| {
                probe.params_mut()[p].as_mut_slice()[i] = v;
                naive_forward(&probe, g, x, labeled)
            };
            let (up, s_up) = eval(orig + h);
            let (down, s_down) = eval(orig - h);
            probe.params_mut()[p].as_mut_slice()[i] = orig;
            if s_up != base_signs || s_down != base_signs {
                report.skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let a = grad[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            report.max_rel_err = report.max_rel_err.max(rel);
            report.checked += 1;
        }
    }
    report
}

/// `(reads, adds)` of aggregating every in-list of `g` directly.
pub fn direct_counts(g: &Graph) -> (usize, usize) {
    (0..g.num_nodes()).fold((0, 0), |(r, a), v| {
        let d = g.neighbors(v as NodeId).len();
        (r + d, a + d.saturating_sub(1))
    })
}

/// `(reads, adds)` after replacing each matched pair by one precomputed
/// sum in its targets' lists, including two reads and one add per pair.
/// Panics if a target does not hold both endpoints.
pub fn reused_counts(g: &Graph, m: &Matching) -> (usize, usize) {
    let mut lists = g.to_adjacency();
    let mut extra = 0usize;
    for (i, e) in m.pairs.iter().enumerate() {
        let merged = (g.num_nodes() + i) as NodeId;
        for &t in &e.targets {
            let list = &mut lists[t as usize];
            let before = list.len();
            list.retain(|&x| x != e.u && x != e.v);
            assert_eq!(before - list.len(), 2, "target {t} lacks pair ({}, {})", e.u, e.v);
            list.push(merged);
        }
        extra += 1;
    }
    let (r, a) = lists.iter().fold((0, 0), |(r, a), l| (r + l.len(), a + l.len().saturating_sub(1)));
    (r + 2 * extra, a + extra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::toy_subgraph;
    use crate::redundancy::{build_aggregation_graph, greedy_matching};

    #[test]
    fn toy_counts() {
        let g = toy_subgraph().local.into_directed();
        assert_eq!(direct_counts(&g), (10, 6));
        let ga = build_aggregation_graph(&g, None);
        let m = greedy_matching(&ga, 1);
        assert_eq!(reused_counts(&g, &m), (10, 4));
    }

    #[test]
    fn transpose_is_the_adjoint() {
        let g = toy_subgraph().local;
        let x = Matrix::from_fn(4, 2, |r, c| (r * 2 + c) as f64 + 1.0);
        let y = Matrix::from_fn(4, 2, |r, c| (r as f64 - c as f64) * 0.5);
        let a = mean_aggregate(&g, &x);
        let b = transpose_mean_aggregate(&g, &y);
        let lhs: f64 = a.as_slice().iter().zip(y.as_slice()).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.as_slice().iter().zip(b.as_slice()).map(|(p, q)| p * q).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
