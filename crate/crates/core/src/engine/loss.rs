use super::{EngineError, Matrix, Scalar};

/// `(row, class)` pairs the loss is averaged over.
pub type LabeledRows = [(usize, u32)];

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport<T> {
    /// Mean cross-entropy over the labeled rows.
    pub loss: f64,
    /// Same shape as the logits; unlabeled rows are zero.
    pub grad_wrt_logits: Matrix<T>,
}

/// Softmax over each labeled row, mean negative log-likelihood, and its
/// gradient `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Matrix<T>,
    labeled: &LabeledRows,
) -> Result<LossReport<T>, EngineError> {
    if labeled.is_empty() {
        return Err(EngineError::MissingLabels);
    }
    let k = logits.cols();
    let batch = T::from_f64(labeled.len() as f64);
    let mut grad = Matrix::zeros(logits.rows(), k);
    let mut total = 0.0f64;
    for &(r, c) in labeled {
        if r >= logits.rows() || c as usize >= k {
            return Err(EngineError::Shape(format!(
                "label ({r}, {c}) outside {}x{k} logits",
                logits.rows()
            )));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        // log-sum-exp form keeps the loss finite for large logits
        total += (sum.ln() + max - row[c as usize]).to_f64();
        let g = grad.row_mut(r);
        for (j, (o, &e)) in g.iter_mut().zip(&exps).enumerate() {
            let p = e / sum;
            let y = if j == c as usize { T::one() } else { T::zero() };
            *o = (p - y) / batch;
        }
    }
    Ok(LossReport {
        loss: total / labeled.len() as f64,
        grad_wrt_logits: grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let z = Matrix::<f64>::zeros(3, 5);
        let r = softmax_cross_entropy(&z, &[(0, 1), (2, 4)]).unwrap();
        assert!((r.loss - 5f64.ln()).abs() < 1e-15);
        assert_eq!(r.grad_wrt_logits.row(1), &[0.0; 5]);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let z = Matrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64 * 0.7 - 2.0);
        let lab: Vec<_> = (0..4).map(|r| (r, (r % 3) as u32)).collect();
        let rep = softmax_cross_entropy(&z, &lab).unwrap();
        assert!(rep.loss >= 0.0);
        for r in 0..4 {
            let s: f64 = rep.grad_wrt_logits.row(r).iter().sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn large_logits_stay_finite() {
        let z = Matrix::from_vec(1, 2, vec![1000.0f32, -1000.0]).unwrap();
        let r = softmax_cross_entropy(&z, &[(0, 1)]).unwrap();
        assert!((r.loss - 2000.0).abs() < 1e-3);
    }

    #[test]
    fn bad_labels_are_errors() {
        let z = Matrix::<f64>::zeros(2, 2);
        assert!(matches!(
            softmax_cross_entropy(&z, &[]),
            Err(EngineError::MissingLabels)
        ));
        assert!(softmax_cross_entropy(&z, &[(0, 2)]).is_err());
        assert!(softmax_cross_entropy(&z, &[(2, 0)]).is_err());
    }
}
