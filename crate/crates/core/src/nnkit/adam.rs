use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            step: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            config,
        }
    }
}

/// One bias-corrected Adam update of `p` in place.
pub fn adam_step(p: &mut [f64], grad: &[f64], s: &mut AdamState) {
    assert_eq!(p.len(), grad.len(), "adam shape mismatch");
    assert_eq!(p.len(), s.first_moment.len(), "adam state shape mismatch");
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        eps,
    } = s.config;
    s.step += 1;
    let c1 = 1.0 - beta1.powi(s.step as i32);
    let c2 = 1.0 - beta2.powi(s.step as i32);
    for i in 0..p.len() {
        let g = grad[i];
        let m = beta1 * s.first_moment[i] + (1.0 - beta1) * g;
        let v = beta2 * s.second_moment[i] + (1.0 - beta2) * g * g;
        s.first_moment[i] = m;
        s.second_moment[i] = v;
        p[i] -= learning_rate * (m / c1) / ((v / c2).sqrt() + eps);
    }
}
