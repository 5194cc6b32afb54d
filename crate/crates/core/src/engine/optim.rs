use std::str::FromStr;

use super::{EngineError, GcnModel, Gradients, Matrix, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Vanilla,
    Momentum { mu: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::Momentum { .. } => "momentum",
            Self::Adam { .. } => "adam",
        }
    }

    /// Auxiliary buffers per weight.
    fn aux_buffers(&self) -> usize {
        match self {
            Self::Vanilla => 0,
            Self::Momentum { .. } => 1,
            Self::Adam { .. } => 2,
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vanilla" | "sgd" => Ok(Self::Vanilla),
            "momentum" => Ok(Self::Momentum { mu: 0.9 }),
            "adam" => Ok(Self::adam()),
            _ => Err(format!("unknown optimizer {s:?} (vanilla | momentum | adam)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::adam(),
            lr: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    cfg: OptimizerConfig,
    /// `aux[k][i]` is buffer `k` (velocity, or first/second moment) of param `i`.
    aux: Vec<Vec<Vec<T>>>,
    steps: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(cfg: OptimizerConfig, model: &GcnModel<T>) -> Self {
        let sizes: Vec<usize> = model.params().iter().map(|m| m.as_slice().len()).collect();
        Self::for_sizes(cfg, &sizes)
    }

    /// State for an arbitrary list of parameter sizes.
    pub fn for_sizes(cfg: OptimizerConfig, sizes: &[usize]) -> Self {
        let aux = (0..cfg.kind.aux_buffers())
            .map(|_| sizes.iter().map(|&n| vec![T::zero(); n]).collect())
            .collect();
        Self { cfg, aux, steps: 0 }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Total auxiliary words held.
    pub fn aux_len(&self) -> usize {
        self.aux.iter().flatten().map(Vec::len).sum()
    }

    pub fn step(&mut self, model: &mut GcnModel<T>, grads: &Gradients<T>) -> Result<(), EngineError> {
        let g: Vec<&Matrix<T>> = grads.params();
        self.update(model.params_mut(), &g)
    }

    /// One update of `params` with matching `grads`.
    pub fn update(&mut self, mut params: Vec<&mut Matrix<T>>, grads: &[&Matrix<T>]) -> Result<(), EngineError> {
        if params.len() != grads.len() {
            return Err(EngineError::Shape("parameter/gradient count".into()));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || self.aux.iter().any(|b| b[i].len() != g.as_slice().len()) {
                return Err(EngineError::Shape(format!("parameter {i} and its gradient or state")));
            }
            if !g.all_finite() {
                return Err(EngineError::NonFinite(format!("gradient of parameter {i}")));
            }
        }
        self.steps += 1;
        let lr = T::from_f64(self.cfg.lr);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let w = p.as_mut_slice();
            let g = g.as_slice();
            match self.cfg.kind {
                OptimizerKind::Vanilla => {
                    for (w, &g) in w.iter_mut().zip(g) {
                        *w = *w - lr * g;
                    }
                }
                OptimizerKind::Momentum { mu } => {
                    let mu = T::from_f64(mu);
                    for ((w, &g), v) in w.iter_mut().zip(g).zip(self.aux[0][i].iter_mut()) {
                        *v = mu * *v + g;
                        *w = *w - lr * *v;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let t = self.steps as i32;
                    let c1 = T::from_f64(1.0 - beta1.powi(t));
                    let c2 = T::from_f64(1.0 - beta2.powi(t));
                    let (b1, b2, eps) = (T::from_f64(beta1), T::from_f64(beta2), T::from_f64(eps));
                    let (first, second) = self.aux.split_at_mut(1);
                    for (((w, &g), m), v) in w
                        .iter_mut()
                        .zip(g)
                        .zip(first[0][i].iter_mut())
                        .zip(second[0][i].iter_mut())
                    {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix<f64> {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    fn run(kind: OptimizerKind, lr: f64, steps: usize, grad: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut st = OptimizerState::for_sizes(OptimizerConfig { kind, lr }, &[1]);
        let mut w = scalar(1.0);
        let mut traj = Vec::new();
        for _ in 0..steps {
            let g = scalar(grad(w.get(0, 0)));
            st.update(vec![&mut w], &[&g]).unwrap();
            traj.push(w.get(0, 0));
        }
        traj
    }

    #[test]
    fn vanilla_single_step() {
        let mut st = OptimizerState::for_sizes(
            OptimizerConfig {
                kind: OptimizerKind::Vanilla,
                lr: 0.1,
            },
            &[1],
        );
        let mut w = scalar(1.0);
        st.update(vec![&mut w], &[&scalar(2.0)]).unwrap();
        assert!((w.get(0, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_momentum_is_vanilla() {
        let quad = |w: f64| 2.0 * w;
        let a = run(OptimizerKind::Vanilla, 0.1, 10, quad);
        let b = run(OptimizerKind::Momentum { mu: 0.0 }, 0.1, 10, quad);
        assert_eq!(a, b);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let traj = run(OptimizerKind::adam(), 0.05, 200, |w| 2.0 * w);
        assert!(traj.iter().any(|w| w.abs() < 0.1));
        assert!(traj.last().unwrap().abs() < 0.1);
    }

    #[test]
    fn aux_sizes_follow_the_kind() {
        let sizes = [6, 4];
        let mk = |kind| OptimizerState::<f32>::for_sizes(OptimizerConfig { kind, lr: 0.1 }, &sizes).aux_len();
        assert_eq!(mk(OptimizerKind::Vanilla), 0);
        assert_eq!(mk(OptimizerKind::Momentum { mu: 0.9 }), 10);
        assert_eq!(mk(OptimizerKind::adam()), 20);
    }

    #[test]
    fn non_finite_gradients_are_rejected() {
        let mut st = OptimizerState::for_sizes(OptimizerConfig::default(), &[1]);
        let mut w = scalar(1.0);
        assert!(st.update(vec![&mut w], &[&scalar(f64::NAN)]).is_err());
        assert_eq!(w.get(0, 0), 1.0);
        assert_eq!(st.steps(), 0);
    }
}
