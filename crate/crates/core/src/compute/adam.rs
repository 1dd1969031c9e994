use serde::{Deserialize, Serialize};

use super::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
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

/// A named parameter with its gradient and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct GradSlot {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    pub step_count: u64,
}

impl GradSlot {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let (r, c) = value.shape();
        Self {
            name: name.into(),
            value,
            grad: Tensor::zeros(r, c),
            adam_m: Tensor::zeros(r, c),
            adam_v: Tensor::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// One bias-corrected Adam update over every slot; gradients are zeroed afterwards.
///
/// Weight decay, when non-zero, is added to the gradient (L2 form).
pub fn adam_step(slots: &mut [GradSlot], cfg: &AdamConfig) {
    for slot in slots.iter_mut() {
        slot.step_count += 1;
        let t = slot.step_count as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let value = slot.value.data_mut();
        let grad = slot.grad.data();
        let m = slot.adam_m.data_mut();
        let v = slot.adam_v.data_mut();
        for i in 0..value.len() {
            let g = grad[i] + cfg.weight_decay * value[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        slot.zero_grad();
    }
}
