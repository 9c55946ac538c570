use serde::{Deserialize, Serialize};

use crate::nn::params::{ParamId, ParamStore};

/// Adam with bias correction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Adam {
    /// Apply one update from the accumulated gradients, then clear them.
    pub fn step(&self, store: &mut ParamStore) {
        store.step += 1;
        let t = store.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..store.len() {
            let p = store.param_mut(ParamId(i));
            for j in 0..p.value.len() {
                let g = p.grad[j];
                p.m[j] = self.beta1 * p.m[j] + (1.0 - self.beta1) * g;
                p.v[j] = self.beta2 * p.v[j] + (1.0 - self.beta2) * g * g;
                let mh = p.m[j] / c1;
                let vh = p.v[j] / c2;
                p.value[j] -= self.lr * mh / (vh.sqrt() + self.eps);
                p.grad[j] = 0.0;
            }
        }
    }
}
