//! AdamW with decoupled weight decay.

use std::collections::HashMap;

use crate::error::Result;
use crate::numkit::Parameter;

pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u32,
    m: HashMap<String, Vec<f64>>,
    v: HashMap<String, Vec<f64>>,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW::new(0.9, 0.999, 1e-8, 0.01)
    }
}

impl AdamW {
    pub fn new(beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        AdamW {
            beta1,
            beta2,
            eps,
            weight_decay,
            t: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }

    /// Applies one update from the accumulated gradients. Frozen parameters
    /// and parameters without gradients are left untouched.
    pub fn step(&mut self, params: &[Parameter], lr: f64) -> Result<()> {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for p in params {
            if p.frozen {
                continue;
            }
            let Some(grad) = p.var.grad() else { continue };
            let mut value = p.value();
            let n = value.len();
            let m = self.m.entry(p.name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.v.entry(p.name.clone()).or_insert_with(|| vec![0.0; n]);
            let data = value.data_mut();
            for i in 0..n {
                let g = grad.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] -= lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * data[i]);
            }
            value.check_finite(&p.name)?;
            p.set_value(value);
        }
        Ok(())
    }
}

/// Zeroes gradient buffers before a fresh backward pass.
pub fn zero_grads(params: &[Parameter]) {
    for p in params {
        p.var.zero_grad();
    }
}

/// Bitwise parameter fingerprint, used to assert frozen-ness in tests.
pub fn fingerprint(params: &[Parameter]) -> Vec<(String, Vec<u64>)> {
    params
        .iter()
        .map(|p| {
            (
                p.name.clone(),
                p.value().data().iter().map(|f| f.to_bits()).collect(),
            )
        })
        .collect()
}
