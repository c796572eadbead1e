use serde::{Deserialize, Serialize};

use super::network::Network;
use super::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-7;

/// Optimizer state for one network.
#[derive(Debug, Clone)]
pub enum Optimizer<T> {
    Sgd,
    Adam { step: i32, m: Vec<Vec<T>>, v: Vec<Vec<T>> },
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, net: &Network<T>) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<T>> = net.params().map(|p| vec![T::zero(); p.value.len()]).collect();
                Optimizer::Adam {
                    step: 0,
                    m: zeros.clone(),
                    v: zeros,
                }
            }
        }
    }

    /// Applies the accumulated gradients of `net` with learning rate `lr`.
    pub fn step(&mut self, net: &mut Network<T>, lr: f64) {
        match self {
            Optimizer::Sgd => {
                let lr = T::cast_f64(lr);
                for p in net.params_mut() {
                    for (w, g) in p.value.iter_mut().zip(&p.grad) {
                        *w = *w - lr * *g;
                    }
                }
            }
            Optimizer::Adam { step, m, v } => {
                *step += 1;
                let b1 = T::cast_f64(ADAM_BETA1);
                let b2 = T::cast_f64(ADAM_BETA2);
                let eps = T::cast_f64(ADAM_EPSILON);
                let one = T::one();
                let c1 = T::cast_f64(1.0 - ADAM_BETA1.powi(*step));
                let c2 = T::cast_f64(1.0 - ADAM_BETA2.powi(*step));
                let lr = T::cast_f64(lr);
                for ((p, m), v) in net.params_mut().zip(m.iter_mut()).zip(v.iter_mut()) {
                    for (((w, &g), m), v) in p.value.iter_mut().zip(&p.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                        let mhat = *m / c1;
                        let vhat = *v / c2;
                        *w = *w - lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
