//! A small differentiable numerics kernel: tensors, forward ops, a
//! reverse-mode tape, dropout masks, initialization and Adam.

mod adam;
pub mod ops;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use tape::{Grads, ParamGrad, Tape, Var};
pub use tensor::Tensor;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named parameter tensors in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// `(λ/2)·‖θ‖²` over all parameters.
    pub fn l2_penalty(&self, lambda: f64) -> f64 {
        ops::l2_penalty(self.tensors.iter().map(|t| &t.data[..]), lambda)
    }

    /// Adds the penalty gradient `λ·θ` into dense buffers.
    pub fn add_l2_grad(&self, lambda: f64, acc: &mut [Vec<f64>]) {
        for (t, a) in self.tensors.iter().zip(acc) {
            for (g, &x) in a.iter_mut().zip(&t.data) {
                *g += lambda * x;
            }
        }
    }

    /// Fills every parameter uniformly from `[-scale, scale]`.
    pub fn init_uniform(&mut self, scale: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut self.tensors {
            for x in &mut t.data {
                *x = rng.random_range(-scale..=scale);
            }
        }
    }
}

/// A dropout mask: each entry is 0 with probability `rate`, else `1/(1−rate)`.
/// Identity when not training or `rate == 0`.
pub fn dropout_mask<R: Rng>(len: usize, rate: f64, rng: &mut R, training: bool) -> Vec<f64> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if !training || rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Applies [`dropout_mask`] to a tensor.
pub fn dropout<R: Rng>(t: &Tensor, rate: f64, rng: &mut R, training: bool) -> Tensor {
    let mask = dropout_mask(t.len(), rate, rng, training);
    Tensor::from_vec(&t.shape, t.data.iter().zip(&mask).map(|(x, m)| x * m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]);
        assert_eq!(dropout(&t, 0.0, &mut rng, true), t);
        assert_eq!(dropout(&t, 0.5, &mut rng, false), t);
    }

    #[test]
    fn dropout_is_seeded() {
        let a = dropout_mask(64, 0.5, &mut ChaCha8Rng::seed_from_u64(7), true);
        let b = dropout_mask(64, 0.5, &mut ChaCha8Rng::seed_from_u64(7), true);
        assert_eq!(a, b);
        assert!(a.iter().all(|&m| m == 0.0 || m == 2.0));
    }

    #[test]
    fn dropout_preserves_mean() {
        let n = 100_000;
        let mask = dropout_mask(n, 0.5, &mut ChaCha8Rng::seed_from_u64(3), true);
        let mean = mask.iter().sum::<f64>() / n as f64;
        // each entry has mean 1 and standard deviation 1
        let sigma = 1.0 / (n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn store_and_penalty() {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::from_vec(&[2], vec![1.0, 1.0]));
        assert_eq!(s.id("w"), Some(id));
        assert_eq!(s.l2_penalty(2.0), 2.0);
        s.init_uniform(0.1, 5);
        assert!(s.tensor(id).data.iter().all(|x| x.abs() <= 0.1));
        let mut zero = ParamStore::new();
        zero.add("z", Tensor::zeros(&[4]));
        assert_eq!(zero.l2_penalty(1.0), 0.0);
    }
}
