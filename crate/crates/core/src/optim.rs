use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::params::ParamStore;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moment buffers mirror the parameter shapes of the store
/// they were created for; frozen parameters are skipped.
#[derive(Debug, Clone)]
pub struct Adam<R> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<R>>,
    second: Vec<Vec<R>>,
}

impl<R: Real> Adam<R> {
    pub fn new(config: AdamConfig, store: &ParamStore<R>) -> Self {
        let zeros = || store.iter().map(|(_, p)| vec![R::zero(); p.value.len()]).collect::<Vec<_>>();
        Adam {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, index: usize) -> &[R] {
        &self.first[index]
    }

    /// One update from the gradients currently held in `store`.
    pub fn step(&mut self, store: &mut ParamStore<R>) {
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let (b1, b2) = (R::lit(c.beta1), R::lit(c.beta2));
        let correction1 = R::one() - R::lit(num_traits::Float::powi(c.beta1, t));
        let correction2 = R::one() - R::lit(num_traits::Float::powi(c.beta2, t));
        let (lr, eps) = (R::lit(c.learning_rate), R::lit(c.epsilon));
        for ((param, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            if !param.trainable {
                continue;
            }
            for (((w, &g), mi), vi) in param.value.data_mut().iter_mut().zip(&param.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (R::one() - b1) * g;
                *vi = b2 * *vi + (R::one() - b2) * g * g;
                let m_hat = *mi / correction1;
                let v_hat = *vi / correction2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
