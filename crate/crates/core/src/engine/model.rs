use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::redundancy::ReducedSubgraph;

use super::{aggregate_reduced, softmax_cross_entropy, Direction, EngineError, LabeledRows, LossReport, Matrix, Scalar};

/// Self and neighbor weights of one graph-convolution layer, each
/// `f_in × f_out/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub w_self: Matrix<T>,
    pub w_neigh: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel<T> {
    pub layers: Vec<LayerWeights<T>>,
    /// `f_L × num_classes`.
    pub mlp: Matrix<T>,
    dims: Vec<usize>,
    num_classes: usize,
}

/// Gradients share the model's layout.
pub type Gradients<T> = GcnModel<T>;

fn glorot<T: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::from_f64(rng.gen_range(-a..=a)))
}

impl<T: Scalar> GcnModel<T> {
    /// `dims = [f_0, f_1, ..., f_L]`; every `f_ℓ` for `ℓ ≥ 1` must be even.
    pub fn new(dims: &[usize], num_classes: usize, seed: u64) -> Result<Self, EngineError> {
        Self::check_dims(dims, num_classes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| LayerWeights {
                w_self: glorot(w[0], w[1] / 2, &mut rng),
                w_neigh: glorot(w[0], w[1] / 2, &mut rng),
            })
            .collect();
        let mlp = glorot(*dims.last().unwrap(), num_classes, &mut rng);
        Ok(Self {
            layers,
            mlp,
            dims: dims.to_vec(),
            num_classes,
        })
    }

    fn check_dims(dims: &[usize], num_classes: usize) -> Result<(), EngineError> {
        if dims.is_empty() || dims.contains(&0) || num_classes == 0 {
            return Err(EngineError::Config(format!(
                "dims {dims:?} and {num_classes} classes must all be positive"
            )));
        }
        if dims[1..].iter().any(|d| d % 2 != 0) {
            return Err(EngineError::Config(format!(
                "layer widths {:?} must be even to split into self/neighbor halves",
                &dims[1..]
            )));
        }
        Ok(())
    }

    /// Builds a model from explicit weights, checking every shape.
    pub fn from_parts(layers: Vec<LayerWeights<T>>, mlp: Matrix<T>) -> Result<Self, EngineError> {
        let mut dims = Vec::with_capacity(layers.len() + 1);
        dims.push(layers.first().map_or(mlp.rows(), |l| l.w_self.rows()));
        for (i, l) in layers.iter().enumerate() {
            if l.w_self.shape() != l.w_neigh.shape() || l.w_self.rows() != dims[i] {
                return Err(EngineError::Shape(format!("layer {} weights", i + 1)));
            }
            dims.push(2 * l.w_self.cols());
        }
        if mlp.rows() != *dims.last().unwrap() {
            return Err(EngineError::Shape("classifier weight rows".into()));
        }
        let num_classes = mlp.cols();
        Self::check_dims(&dims, num_classes)?;
        Ok(Self {
            layers,
            mlp,
            dims,
            num_classes,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerWeights {
                    w_self: Matrix::zeros(l.w_self.rows(), l.w_self.cols()),
                    w_neigh: Matrix::zeros(l.w_neigh.rows(), l.w_neigh.cols()),
                })
                .collect(),
            mlp: Matrix::zeros(self.mlp.rows(), self.mlp.cols()),
            dims: self.dims.clone(),
            num_classes: self.num_classes,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Every weight matrix in a fixed order: per layer self then neighbor,
    /// then the classifier.
    pub fn params(&self) -> Vec<&Matrix<T>> {
        let mut v: Vec<&Matrix<T>> = self.layers.iter().flat_map(|l| [&l.w_self, &l.w_neigh]).collect();
        v.push(&self.mlp);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut v: Vec<&mut Matrix<T>> = self
            .layers
            .iter_mut()
            .flat_map(|l| [&mut l.w_self, &mut l.w_neigh])
            .collect();
        v.push(&mut self.mlp);
        v
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|m| m.rows() * m.cols()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|m| m.all_finite())
    }

    pub fn cast<U: Scalar>(&self) -> GcnModel<U> {
        GcnModel {
            layers: self
                .layers
                .iter()
                .map(|l| LayerWeights {
                    w_self: l.w_self.cast(),
                    w_neigh: l.w_neigh.cast(),
                })
                .collect(),
            mlp: self.mlp.cast(),
            dims: self.dims.clone(),
            num_classes: self.num_classes,
        }
    }
}

/// ReLU status bits: bit `(r, c)` is set iff the pre-activation was positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReluMask {
    rows: usize,
    cols: usize,
    bits: Vec<u64>,
}

impl ReluMask {
    pub fn get(&self, r: usize, c: usize) -> bool {
        let i = r * self.cols + c;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Applies ReLU in place and records which entries survived.
    fn relu<T: Scalar>(m: &mut Matrix<T>) -> Self {
        let (rows, cols) = m.shape();
        let mut bits = vec![0u64; (rows * cols).div_ceil(64)];
        for (i, v) in m.as_mut_slice().iter_mut().enumerate() {
            if *v > T::zero() {
                bits[i / 64] |= 1 << (i % 64);
            } else {
                *v = T::zero();
            }
        }
        Self { rows, cols, bits }
    }

    /// Zeroes the entries of `g` whose status bit is clear.
    pub fn apply<T: Scalar>(&self, g: &mut Matrix<T>) -> Result<(), EngineError> {
        if g.shape() != self.shape() {
            return Err(EngineError::Shape(format!(
                "mask {:?} applied to {:?}",
                self.shape(),
                g.shape()
            )));
        }
        for (i, v) in g.as_mut_slice().iter_mut().enumerate() {
            if self.bits[i / 64] >> (i % 64) & 1 == 0 {
                *v = T::zero();
            }
        }
        Ok(())
    }
}

/// Everything the backward pass reads.
#[derive(Debug, Clone)]
pub struct ActivationTape<T> {
    /// Layer inputs/outputs `X^(0) .. X^(L)`.
    pub xs: Vec<Matrix<T>>,
    /// `D⁻¹ A X^(ℓ)` for `ℓ = 0 .. L-1`.
    pub aggs: Vec<Matrix<T>>,
    pub masks: Vec<ReluMask>,
    /// Classifier output after ReLU.
    pub logits: Matrix<T>,
    pub mlp_mask: ReluMask,
}

/// `ReLU([x·W_self | agg·W_neigh])`.
pub fn forward_layer<T: Scalar>(
    x: &Matrix<T>,
    agg: &Matrix<T>,
    layer: &LayerWeights<T>,
) -> Result<(Matrix<T>, ReluMask), EngineError> {
    let mut out = x.matmul(&layer.w_self)?.hconcat(&agg.matmul(&layer.w_neigh)?)?;
    if !out.all_finite() {
        return Err(EngineError::NonFinite("layer output".into()));
    }
    let mask = ReluMask::relu(&mut out);
    Ok((out, mask))
}

/// Runs every layer and the classifier; computes the loss when `labeled`
/// is given.
pub fn forward<T: Scalar>(
    model: &GcnModel<T>,
    rs: &ReducedSubgraph,
    x0: &Matrix<T>,
    labeled: Option<&LabeledRows>,
) -> Result<(ActivationTape<T>, Option<LossReport<T>>), EngineError> {
    if x0.cols() != model.dims()[0] {
        return Err(EngineError::Shape(format!(
            "input has {} features, model expects {}",
            x0.cols(),
            model.dims()[0]
        )));
    }
    let mut xs = vec![x0.clone()];
    let mut aggs = Vec::with_capacity(model.num_layers());
    let mut masks = Vec::with_capacity(model.num_layers());
    for layer in &model.layers {
        let x = xs.last().unwrap();
        let agg = aggregate_reduced(rs, x, Direction::Forward)?;
        let (next, mask) = forward_layer(x, &agg, layer)?;
        aggs.push(agg);
        masks.push(mask);
        xs.push(next);
    }
    let mut logits = xs.last().unwrap().matmul(&model.mlp)?;
    if !logits.all_finite() {
        return Err(EngineError::NonFinite("classifier output".into()));
    }
    let mlp_mask = ReluMask::relu(&mut logits);
    let loss = labeled
        .map(|l| softmax_cross_entropy(&logits, l))
        .transpose()?;
    Ok((
        ActivationTape {
            xs,
            aggs,
            masks,
            logits,
            mlp_mask,
        },
        loss,
    ))
}

/// Chain rule from the logit gradient down to every weight.
///
/// For layer `ℓ` with masked upstream gradient `G = [G_self | G_neigh]`:
/// `∂W_self = X^(ℓ-1)ᵀ G_self`, `∂W_neigh = (D⁻¹A X^(ℓ-1))ᵀ G_neigh`, and
/// `∂X^(ℓ-1) = G_self W_selfᵀ + (A D⁻¹ G_neigh) W_neighᵀ`. The neighbor term
/// aggregates the half-width gradient before the product. Only the current
/// and next activation gradients are alive at any time.
pub fn backward<T: Scalar>(
    model: &GcnModel<T>,
    rs: &ReducedSubgraph,
    tape: &ActivationTape<T>,
    grad_logits: &Matrix<T>,
) -> Result<Gradients<T>, EngineError> {
    let l_count = model.num_layers();
    if tape.xs.len() != l_count + 1 || tape.aggs.len() != l_count || tape.masks.len() != l_count {
        return Err(EngineError::Shape("tape does not match model depth".into()));
    }
    let mut grads = model.zeros_like();
    let mut g = grad_logits.clone();
    tape.mlp_mask.apply(&mut g)?;
    grads.mlp = tape.xs[l_count].t_matmul(&g)?;
    let mut dx = g.matmul_t(&model.mlp)?;

    for l in (0..l_count).rev() {
        let layer = &model.layers[l];
        tape.masks[l].apply(&mut dx)?;
        let (g_self, g_neigh) = dx.split_cols(layer.w_self.cols());
        grads.layers[l].w_self = tape.xs[l].t_matmul(&g_self)?;
        grads.layers[l].w_neigh = tape.aggs[l].t_matmul(&g_neigh)?;
        if l == 0 {
            break;
        }
        let mut next = g_self.matmul_t(&layer.w_self)?;
        let spread = aggregate_reduced(rs, &g_neigh, Direction::Backward)?;
        next.add_assign(&spread.matmul_t(&layer.w_neigh)?)?;
        dx = next;
    }
    if !grads.all_finite() {
        return Err(EngineError::NonFinite("gradients".into()));
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::oracle;
    use crate::redundancy::{reduce, ReduceConfig};
    use crate::synth;

    fn eye(n: usize) -> Matrix<f64> {
        Matrix::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    #[test]
    fn identity_weights_pass_through() {
        let x = Matrix::from_fn(3, 2, |r, c| r as f64 - c as f64);
        let agg = Matrix::from_fn(3, 2, |r, c| (r + c) as f64 - 1.5);
        let layer = LayerWeights {
            w_self: eye(2),
            w_neigh: eye(2),
        };
        let (out, mask) = forward_layer(&x, &agg, &layer).unwrap();
        let expect = x.hconcat(&agg).unwrap().map(|v| v.max(0.0));
        assert_eq!(out, expect);
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(mask.get(r, c), expect.get(r, c) > 0.0);
            }
        }
    }

    #[test]
    fn negative_preactivations_clip_everything() {
        let x = Matrix::from_fn(2, 2, |_, _| 1.0);
        let layer = LayerWeights {
            w_self: Matrix::from_fn(2, 1, |_, _| -1.0),
            w_neigh: Matrix::from_fn(2, 1, |_, _| -2.0),
        };
        let (out, mask) = forward_layer(&x, &x, &layer).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(mask.count_ones(), 0);
    }

    #[test]
    fn forward_layer_matches_naive_oracle() {
        let m: GcnModel<f64> = GcnModel::new(&[5, 6], 2, 3).unwrap();
        let x = Matrix::from_fn(7, 5, |r, c| ((r * 5 + c) as f64 * 0.37).sin());
        let agg = Matrix::from_fn(7, 5, |r, c| ((r + 2 * c) as f64 * 0.21).cos());
        let (out, _) = forward_layer(&x, &agg, &m.layers[0]).unwrap();
        let naive = oracle::naive_layer(&x, &agg, &m.layers[0]);
        assert!(out.max_abs_diff(&naive) <= 1e-12);
    }

    #[test]
    fn dims_are_validated() {
        assert!(GcnModel::<f32>::new(&[4, 3], 2, 0).is_err());
        assert!(GcnModel::<f32>::new(&[4, 0], 2, 0).is_err());
        assert!(GcnModel::<f32>::new(&[4, 8], 0, 0).is_err());
        let m = GcnModel::<f32>::new(&[4, 8, 6], 3, 0).unwrap();
        assert_eq!(m.param_count(), 2 * 4 * 4 + 2 * 8 * 3 + 6 * 3);
        assert_eq!(GcnModel::from_parts(m.layers.clone(), m.mlp.clone()).unwrap(), m);
    }

    #[test]
    fn loss_matches_scalar_reference() {
        let g = synth::random_graph(8, 3.0, 4);
        let rs = ReducedSubgraph::identity(&g);
        let model: GcnModel<f64> = GcnModel::new(&[4, 4, 4], 3, 8).unwrap();
        let x = Matrix::from_fn(8, 4, |r, c| ((r * 4 + c) as f64 * 0.9).sin() + 0.3);
        let labeled: Vec<_> = (0..8).map(|r| (r, (r % 3) as u32)).collect();
        let (_, loss) = forward(&model, &rs, &x, Some(&labeled)).unwrap();
        let reference = oracle::scalar_loss(&model, &g, &x, &labeled);
        assert!((loss.unwrap().loss - reference).abs() <= 1e-12);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let g = synth::random_graph(10, 3.0, 1);
        let rs = ReducedSubgraph::identity(&g);
        let model: GcnModel<f64> = GcnModel::new(&[3, 4, 4], 2, 2).unwrap();
        let x = Matrix::from_fn(10, 3, |r, c| (r + c) as f64 * 0.1);
        let (tape, _) = forward(&model, &rs, &x, None).unwrap();
        let grads = backward(&model, &rs, &tape, &Matrix::zeros(10, 2)).unwrap();
        assert!(grads.params().iter().all(|m| m.as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn masks_match_forward_zeros() {
        let g = synth::random_graph(12, 4.0, 6);
        let rs = ReducedSubgraph::identity(&g);
        let model: GcnModel<f64> = GcnModel::new(&[3, 6, 4], 2, 5).unwrap();
        let x = Matrix::from_fn(12, 3, |r, c| ((r * 3 + c) as f64).cos());
        let (tape, _) = forward(&model, &rs, &x, None).unwrap();
        for (l, mask) in tape.masks.iter().enumerate() {
            let out = &tape.xs[l + 1];
            for r in 0..out.rows() {
                for c in 0..out.cols() {
                    assert_eq!(mask.get(r, c), out.get(r, c) != 0.0);
                }
            }
        }
    }

    #[test]
    fn reduced_and_direct_gradients_agree() {
        let g = synth::random_graph(150, 8.0, 12);
        let cfg = ReduceConfig {
            theta: 1,
            ..Default::default()
        };
        let (rs, m) = reduce(&g, &cfg).unwrap();
        assert!(m.matching_total > 0);
        let plain = ReducedSubgraph::identity(&g);
        let model: GcnModel<f64> = GcnModel::new(&[6, 8, 8], 3, 1).unwrap();
        let x = Matrix::from_fn(150, 6, |r, c| ((r * 7 + c) as f64 * 0.13).sin());
        let lab: Vec<_> = (0..150).map(|r| (r, (r % 3) as u32)).collect();
        let run = |rs: &ReducedSubgraph| {
            let (tape, loss) = forward(&model, rs, &x, Some(&lab)).unwrap();
            backward(&model, rs, &tape, &loss.unwrap().grad_wrt_logits).unwrap()
        };
        let (a, b) = (run(&rs), run(&plain));
        for (p, q) in a.params().iter().zip(b.params()) {
            assert!(p.max_abs_diff(q) <= 1e-10);
        }
    }

    #[test]
    fn node_relabeling_leaves_loss_unchanged() {
        let g = synth::random_graph(9, 3.0, 21);
        let perm: Vec<u32> = vec![4, 7, 0, 8, 2, 1, 6, 3, 5];
        let edges: Vec<_> = g
            .edges()
            .into_iter()
            .map(|(u, v)| (perm[u as usize], perm[v as usize]))
            .collect();
        let gp = Graph::from_edges(9, &edges, false).unwrap().0;
        let model: GcnModel<f64> = GcnModel::new(&[3, 4, 4], 2, 9).unwrap();
        let x = Matrix::from_fn(9, 3, |r, c| ((r * 3 + c) as f64 * 0.5).sin());
        let mut xp = Matrix::zeros(9, 3);
        for r in 0..9 {
            xp.row_mut(perm[r] as usize).copy_from_slice(x.row(r));
        }
        let lab: Vec<_> = (0..9).map(|r| (r, (r % 2) as u32)).collect();
        let labp: Vec<_> = lab.iter().map(|&(r, c)| (perm[r] as usize, c)).collect();
        let (_, a) = forward(&model, &ReducedSubgraph::identity(&g), &x, Some(&lab)).unwrap();
        let (_, b) = forward(&model, &ReducedSubgraph::identity(&gp), &xp, Some(&labp)).unwrap();
        assert!((a.unwrap().loss - b.unwrap().loss).abs() < 1e-12);
    }
}
