//! Adam with bias correction.

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr: 0.001,
            epochs: 300,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(invalid(format!("Adam betas must lie in (0, 1): {self:?}")));
        }
        if !(self.lr > 0.0) || !(self.eps > 0.0) {
            return Err(invalid(format!(
                "Adam lr and eps must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Optimizer state for a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: AdamParams, len: usize) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        })
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len(), "parameter length changed");
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        let AdamParams {
            beta1,
            beta2,
            eps,
            lr,
            ..
        } = self.params;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
