//! Adam with optional global gradient-norm clipping.

use super::graph::{Gradients, ParamId, ParamStore};
use super::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Clip the gradient norm of the trainable set to this value.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_grad_norm: Some(1.0),
        }
    }
}

pub struct Adam<T> {
    config: AdamConfig,
    first: Vec<Option<Tensor<T>>>,
    second: Vec<Option<Tensor<T>>>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, store: &ParamStore<T>) -> Self {
        Self {
            config,
            first: (0..store.len()).map(|_| None).collect(),
            second: (0..store.len()).map(|_| None).collect(),
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter selected by `trainable` that has
    /// a gradient. Returns the pre-clipping gradient norm.
    pub fn step(
        &mut self,
        store: &mut ParamStore<T>,
        grads: &Gradients<T>,
        trainable: impl Fn(ParamId) -> bool,
    ) -> f64 {
        self.step += 1;
        let norm = grads.norm(&trainable);
        let clip = match self.config.max_grad_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let step_size = c.learning_rate / bc1;
        for id in store.ids().collect::<Vec<_>>() {
            if !trainable(id) {
                continue;
            }
            let Some(g) = grads.get(id) else { continue };
            let shape = g.shape();
            let m = self.first[id.0].get_or_insert_with(|| Tensor::zeros(shape));
            let v = self.second[id.0].get_or_insert_with(|| Tensor::zeros(shape));
            let p = store.get_mut(id);
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let gv = gv.to_f64() * clip;
                let mn = c.beta1 * mv.to_f64() + (1.0 - c.beta1) * gv;
                let vn = c.beta2 * vv.to_f64() + (1.0 - c.beta2) * gv * gv;
                *mv = T::from_f64(mn);
                *vv = T::from_f64(vn);
                let denom = (vn / bc2).sqrt() + c.epsilon;
                *pv = T::from_f64(pv.to_f64() - step_size * mn / denom);
            }
        }
        norm
    }
}
