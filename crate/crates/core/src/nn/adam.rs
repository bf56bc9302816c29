use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay: parameters shrink by `lr·weight_decay·p` each step.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam optimizer state: one pair of moment buffers per parameter slice.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// One update over every `(parameter, gradient)` pair. The pairs must be
    /// passed in the same order on every call.
    pub fn step<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a mut [f64], &'a [f64])>) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps, weight_decay } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (slot, (param, grad)) in pairs.into_iter().enumerate() {
            assert_eq!(param.len(), grad.len(), "parameter/gradient length mismatch");
            if slot == self.first.len() {
                self.first.push(vec![0.0; param.len()]);
                self.second.push(vec![0.0; param.len()]);
            }
            let (m, v) = (&mut self.first[slot], &mut self.second[slot]);
            assert_eq!(m.len(), param.len(), "parameter {slot} changed size");
            for i in 0..param.len() {
                let g = grad[i];
                if weight_decay != 0.0 {
                    param[i] -= lr * weight_decay * param[i];
                }
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                param[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}
