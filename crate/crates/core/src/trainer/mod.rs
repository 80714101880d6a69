//! Mini-batch training with Adam, early stopping on the epoch training loss,
//! and model/tensor persistence.

mod binio;
mod checkpoint;
mod tensors_io;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use tensors_io::{
    decode_tensors, encode_tensors, read_tensors, write_tensors, TENSORS_MAGIC, TENSORS_VERSION,
};

use crate::error::{Error, Result};
use crate::model::{HyperParams, Mode, Model, Variant};
use crate::nnkit::{adam_step, AdamConfig, AdamState, Grads};
use crate::preprocess::PreprocessedPatch;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Smallest loss decrease that counts as an improvement.
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            learning_rate: 1e-3,
            seed: 0,
            min_delta: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch size, epochs and patience must be positive".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config("patience exceeds max epochs".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sum of batch losses (cross-entropy plus penalty) over the item count.
    pub mean_loss: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

/// A seeded permutation of `0..n` cut into chunks; the last may be short.
pub fn minibatches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Stops after `patience` consecutive epochs without a strict improvement
/// larger than `min_delta`.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    min_delta: f64,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopper {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopper {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Observation {
        let improved = loss < self.best - self.min_delta || (self.best.is_infinite() && loss.is_finite());
        if improved {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        Observation {
            improved,
            stop: self.stale >= self.patience,
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Mixes seed components into an independent stream seed (SplitMix64 finalizer).
pub fn stream_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

fn targets(data: &[PreprocessedPatch]) -> Result<Vec<f64>> {
    data.iter()
        .map(|p| {
            p.label
                .map(|l| l.target())
                .ok_or_else(|| Error::Config(format!("patch {} has no label", p.commit_id)))
        })
        .collect()
}

/// Initializes a model from `cfg.seed` and trains it.
pub fn train(
    data: &[PreprocessedPatch],
    hp: &HyperParams,
    variant: Variant,
    vocab_sizes: (usize, usize),
    cfg: &TrainConfig,
) -> Result<(Model, TrainHistory)> {
    let model = Model::initialized(hp.clone(), variant, vocab_sizes.0, vocab_sizes.1, cfg.seed)?;
    train_model(model, data, cfg, |_| {})
}

/// Trains `model` in place of its current parameters and returns the
/// parameters of the lowest-loss epoch. `on_epoch` sees each finished epoch.
pub fn train_model(
    mut model: Model,
    data: &[PreprocessedPatch],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Model, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let y = targets(data)?;
    let lambda = model.hp.lambda;
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut states: Vec<AdamState> = model
        .params
        .iter()
        .map(|(_, _, t)| AdamState::new(t.len(), adam_cfg))
        .collect();
    let mut acc: Vec<Vec<f64>> = model.params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(stream_seed(&[cfg.seed, 1]));
    let mut stopper = EarlyStopper::new(cfg.patience, cfg.min_delta);
    let mut best = model.params.clone();
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut total = 0.0;
        for (b, batch) in minibatches(data.len(), cfg.batch_size, &mut shuffle_rng).iter().enumerate() {
            let results: Vec<(f64, Grads)> = batch
                .par_iter()
                .map(|&i| {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(stream_seed(&[cfg.seed, 2, epoch as u64, i as u64]));
                    model.loss_and_grads(&data[i], y[i], &mut Mode::Train(&mut rng))
                })
                .collect();
            acc.iter_mut().for_each(|a| a.fill(0.0));
            let mut batch_loss = 0.0;
            for (loss, grads) in &results {
                batch_loss += loss;
                grads.add_to(&model.params, &mut acc);
            }
            batch_loss += model.params.l2_penalty(lambda);
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            model.params.add_l2_grad(lambda, &mut acc);
            let ids: Vec<_> = model.params.iter().map(|(id, _, _)| id).collect();
            for (id, (g, s)) in ids.into_iter().zip(acc.iter().zip(states.iter_mut())) {
                adam_step(&mut model.params.tensor_mut(id).data, g, s);
            }
            total += batch_loss;
        }
        let record = EpochRecord {
            epoch,
            mean_loss: total / data.len() as f64,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        let obs = stopper.observe(epoch, record.mean_loss);
        epochs.push(record);
        if obs.improved {
            best = model.params.clone();
        }
        if obs.stop {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    let history = TrainHistory {
        stopped_epoch: epochs.len(),
        best_epoch: stopper.best_epoch(),
        stop_reason,
        epochs,
    };
    model.params = best;
    Ok((model, history))
}
