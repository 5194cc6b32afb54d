use crate::redundancy::ReducedSubgraph;

use super::{EngineError, Matrix, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `D⁻¹ A X`.
    Forward,
    /// `A D⁻¹ X`, for the neighbor half of the activation gradient.
    Backward,
}

fn inv_degrees<T: Scalar>(rs: &ReducedSubgraph) -> Vec<T> {
    rs.degrees()
        .iter()
        .map(|&d| if d == 0 { T::zero() } else { T::one() / T::from_f64(d as f64) })
        .collect()
}

/// Mean-neighbor aggregation over a reduced subgraph.
///
/// Merged-node sums are computed first in definition order, then each
/// original node sums its in-list, reading from `x` or from the merged sums.
/// The forward direction scales the result by `1/d_v`; the backward one
/// scales the input instead, which equals `A D⁻¹ X` because `A` is symmetric.
/// Isolated nodes aggregate to zero.
pub fn aggregate_reduced<T: Scalar>(
    rs: &ReducedSubgraph,
    x: &Matrix<T>,
    dir: Direction,
) -> Result<Matrix<T>, EngineError> {
    let n0 = rs.original_count();
    if x.rows() != n0 {
        return Err(EngineError::Shape(format!(
            "aggregation input has {} rows, subgraph has {n0} nodes",
            x.rows()
        )));
    }
    let f = x.cols();
    let inv = inv_degrees::<T>(rs);
    let scaled;
    let src = match dir {
        Direction::Forward => x,
        Direction::Backward => {
            let mut s = x.clone();
            s.scale_rows(&inv);
            scaled = s;
            &scaled
        }
    };

    let merged = rs.merged();
    let mut xm = vec![T::zero(); merged.len() * f];
    for (i, &[a, b]) in merged.iter().enumerate() {
        let (done, rest) = xm.split_at_mut(i * f);
        let row = &mut rest[..f];
        for id in [a, b] {
            let k = id as usize;
            let s = if k < n0 { src.row(k) } else { &done[(k - n0) * f..(k - n0 + 1) * f] };
            for (o, &v) in row.iter_mut().zip(s) {
                *o = *o + v;
            }
        }
    }

    let g = rs.graph();
    let mut out = Matrix::zeros(n0, f);
    for w in 0..n0 {
        let row = out.row_mut(w);
        for &id in g.neighbors(w as u32) {
            let k = id as usize;
            let s = if k < n0 { src.row(k) } else { &xm[(k - n0) * f..(k - n0 + 1) * f] };
            for (o, &v) in row.iter_mut().zip(s) {
                *o = *o + v;
            }
        }
    }
    if dir == Direction::Forward {
        out.scale_rows(&inv);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::toy_graph;
    use crate::graph::{induced_subgraph, Graph};
    use crate::oracle;
    use crate::redundancy::{reduce, ReduceConfig};
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_x(n: usize, f: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(n, f, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn toy_node_zero_is_mean_of_its_neighbors() {
        let s = induced_subgraph(&toy_graph(), &[0, 1, 2, 3]).unwrap();
        let x = Matrix::from_fn(4, 3, |r, c| [[2.0, 0.0, 6.0], [1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]][r][c]);
        let cfg = ReduceConfig {
            theta: 1,
            ..Default::default()
        };
        let (rs, _) = reduce(&s.local, &cfg).unwrap();
        assert!(rs.matching_total() > 0);
        let out = aggregate_reduced(&rs, &x, Direction::Forward).unwrap();
        assert_eq!(out.row(0), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn star_with_constant_features() {
        let edges: Vec<_> = (1..6).map(|l| (0, l)).collect();
        let g = Graph::from_edges(6, &edges, false).unwrap().0;
        let rs = ReducedSubgraph::identity(&g);
        let x = Matrix::from_fn(6, 2, |_, _| 3.5);
        let out = aggregate_reduced(&rs, &x, Direction::Forward).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn isolated_rows_are_zero_and_shape_is_checked() {
        let rs = ReducedSubgraph::identity(&Graph::empty(3, false));
        let x = Matrix::from_fn(3, 2, |_, _| 1.0f64);
        for dir in [Direction::Forward, Direction::Backward] {
            assert!(aggregate_reduced(&rs, &x, dir)
                .unwrap()
                .as_slice()
                .iter()
                .all(|&v| v == 0.0));
        }
        assert!(aggregate_reduced(&rs, &Matrix::<f64>::zeros(2, 2), Direction::Forward).is_err());
    }

    #[test]
    fn reduced_matches_csr_oracle_both_directions() {
        let g = synth::random_graph(500, 10.0, 17);
        let cfg = ReduceConfig {
            theta: 1,
            degree_cap: None,
            ..Default::default()
        };
        let (rs, m) = reduce(&g, &cfg).unwrap();
        assert!(m.rounds_run >= 2);
        let x = random_x(500, 16, 5);
        let fwd = aggregate_reduced(&rs, &x, Direction::Forward).unwrap();
        assert!(fwd.max_abs_diff(&oracle::mean_aggregate(&g, &x)) <= 1e-10);
        let bwd = aggregate_reduced(&rs, &x, Direction::Backward).unwrap();
        assert!(bwd.max_abs_diff(&oracle::transpose_mean_aggregate(&g, &x)) <= 1e-10);
    }

    #[test]
    fn backward_is_the_adjoint_of_forward() {
        // <D⁻¹A x, y> == <x, A D⁻¹ y>
        let g = synth::random_graph(120, 6.0, 2);
        let (rs, _) = reduce(&g, &ReduceConfig::default()).unwrap();
        let x = random_x(120, 4, 1);
        let y = random_x(120, 4, 2);
        let dot = |a: &Matrix<f64>, b: &Matrix<f64>| -> f64 {
            a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| p * q).sum()
        };
        let lhs = dot(&aggregate_reduced(&rs, &x, Direction::Forward).unwrap(), &y);
        let rhs = dot(&x, &aggregate_reduced(&rs, &y, Direction::Backward).unwrap());
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
