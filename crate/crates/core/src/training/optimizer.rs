use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Parameter, Real};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Debug)]
struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
    steps: u64,
}

/// SGD or bias-corrected Adam over an ordered parameter list.
///
/// Moment buffers are matched to parameters by position, so callers must
/// pass parameters in the same order on every step. A parameter whose
/// gradient is entirely zero is left untouched, moments included.
#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: u64,
    moments: Vec<Option<Moments<T>>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            moments: Vec::new(),
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    /// Number of completed steps.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update and zeroes all gradients.
    pub fn step(&mut self, mut params: Vec<&mut Parameter<T>>) -> Result<()> {
        if !params.iter().any(|p| p.has_grad()) {
            return Err(Error::Usage(
                "optimizer step before any backward pass".into(),
            ));
        }
        if self.moments.len() < params.len() {
            self.moments.resize(params.len(), None);
        }
        let lr = T::of(self.learning_rate);
        for (slot, p) in self.moments.iter_mut().zip(params.iter_mut()) {
            let active = p.requires_grad && p.gradient.data().iter().any(|&g| g != T::zero());
            if active {
                match self.kind {
                    OptimizerKind::Sgd => {
                        let Parameter {
                            value, gradient, ..
                        } = &mut **p;
                        for (w, &g) in value.data_mut().iter_mut().zip(gradient.data()) {
                            *w = *w - lr * g;
                        }
                    }
                    OptimizerKind::Adam => {
                        let n = p.value.len();
                        let st = slot.get_or_insert_with(|| Moments {
                            m: vec![T::zero(); n],
                            v: vec![T::zero(); n],
                            steps: 0,
                        });
                        st.steps += 1;
                        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
                        let c1 = T::one() - T::of(self.beta1.powi(st.steps as i32));
                        let c2 = T::one() - T::of(self.beta2.powi(st.steps as i32));
                        let eps = T::of(self.eps);
                        let Parameter {
                            value, gradient, ..
                        } = &mut **p;
                        for (((w, &g), m), v) in value
                            .data_mut()
                            .iter_mut()
                            .zip(gradient.data())
                            .zip(st.m.iter_mut())
                            .zip(st.v.iter_mut())
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
            p.zero_grad();
        }
        self.steps += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn param(v: f64, g: f64) -> Parameter<f64> {
        let mut p = Parameter::new("p", Tensor::scalar(v));
        p.accumulate_raw(&[g]);
        p
    }

    #[test]
    fn sgd_step() {
        let mut p = param(1.0, 2.0);
        Optimizer::sgd(0.1).step(vec![&mut p]).unwrap();
        assert!((p.value.data()[0] - 0.8).abs() < 1e-15);
        assert_eq!(p.gradient.data()[0], 0.0);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut p = param(1.5, 0.0);
            let mut q = param(1.0, 1.0);
            Optimizer::new(kind, 0.1)
                .step(vec![&mut p, &mut q])
                .unwrap();
            assert_eq!(p.value.data()[0], 1.5);
            assert_ne!(q.value.data()[0], 1.0);
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        for c in [3.0, -0.02, 1e3] {
            let mut p = param(0.0, c);
            Optimizer::adam(1e-3).step(vec![&mut p]).unwrap();
            // m̂ = c, v̂ = c², so the update is lr·c/(|c| + ε)
            let want = -1e-3 * c / (c.abs() + 1e-8);
            assert!((p.value.data()[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn step_without_backward_is_usage_error() {
        let mut p = Parameter::new("p", Tensor::scalar(1.0f64));
        let err = Optimizer::adam(1e-3).step(vec![&mut p]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn frozen_parameters_never_move() {
        let mut p = param(1.0, 5.0);
        p.requires_grad = false;
        let mut q = param(1.0, 1.0);
        Optimizer::adam(0.5).step(vec![&mut p, &mut q]).unwrap();
        assert_eq!(p.value.data()[0], 1.0);
    }
}
