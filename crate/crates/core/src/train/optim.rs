use serde::{Deserialize, Serialize};

use crate::nn::Model;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adaptive-moment gradient descent with bias correction.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    config: AdamConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, model: &Model<T>) -> Self {
        let zeros = |t: &crate::nn::ParamTensor<'_, T>| vec![T::zero(); t.data.len()];
        let tensors = model.tensors();
        Adam { config, step: 0, m: tensors.iter().map(zeros).collect(), v: tensors.iter().map(zeros).collect() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Applies one update from `grads`, which must share the model's layout.
    pub fn update(&mut self, model: &mut Model<T>, grads: &Model<T>) {
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let lr = T::of(c.learning_rate * bc2.sqrt() / bc1);
        let eps = T::of(c.eps * bc2.sqrt());
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let grads = grads.tensors();
        for (((_, p), g), (m, v)) in model.tensors_mut().into_iter().zip(&grads).zip(self.m.iter_mut().zip(&mut self.v)) {
            for i in 0..p.len() {
                let gi = g.data[i];
                m[i] = b1 * m[i] + one_b1 * gi;
                v[i] = b2 * v[i] + one_b2 * gi * gi;
                p[i] -= lr * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}
