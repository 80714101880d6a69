//! Flat `key = value` configuration files layered over built-in defaults.

use crate::UsageError;
use anyhow::{Context, Result};
use patchnet::model::HyperParams;
use patchnet::trainer::TrainConfig;
use serde::Serialize;
use std::path::Path;
use std::str::FromStr;

pub const SEED_ENV: &str = "PATCHNET_SEED";

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub hyperparams: HyperParams,
    pub train: TrainConfig,
    /// Minimum corpus frequency for a vocabulary entry.
    pub min_count: usize,
    /// Keep frequently called function names verbatim during tokenization.
    pub function_names: bool,
    /// Seed from the config file, if any.
    #[serde(skip)]
    pub config_seed: Option<u64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            hyperparams: HyperParams::default(),
            train: TrainConfig::default(),
            min_count: 1,
            function_names: true,
            config_seed: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| UsageError(format!("invalid value `{value}` for `{key}`")).into())
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            s.apply_text(&text)?;
        }
        Ok(s)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let hp = &mut self.hyperparams;
        let tc = &mut self.train;
        match key {
            "d_m" => hp.d_m = parse(key, value)?,
            "d_c" => hp.d_c = parse(key, value)?,
            "n_filters" => hp.n_filters = parse(key, value)?,
            "filter_sizes" => {
                hp.filter_sizes = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "fc_size" => hp.fc_size = parse(key, value)?,
            "msg_len" => hp.msg_len = parse(key, value)?,
            "files" => hp.files = parse(key, value)?,
            "hunks" => hp.hunks = parse(key, value)?,
            "lines" => hp.lines = parse(key, value)?,
            "words" => hp.words = parse(key, value)?,
            "dropout" => hp.dropout = parse(key, value)?,
            "lambda" => hp.lambda = parse(key, value)?,
            "threshold" => hp.threshold = parse(key, value)?,
            "share_line_filters" => hp.share_line_filters = parse(key, value)?,
            "batch_size" => tc.batch_size = parse(key, value)?,
            "max_epochs" => tc.max_epochs = parse(key, value)?,
            "patience" => tc.patience = parse(key, value)?,
            "learning_rate" => tc.learning_rate = parse(key, value)?,
            "min_delta" => tc.min_delta = parse(key, value)?,
            "seed" => self.config_seed = Some(parse(key, value)?),
            "min_count" => self.min_count = parse(key, value)?,
            "function_names" => self.function_names = parse(key, value)?,
            _ => return Err(UsageError(format!("unknown config key `{key}`")).into()),
        }
        Ok(())
    }

    /// `--seed` first, then the config file, then the environment, then 0.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag.or(self.config_seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => parse(SEED_ENV, v.trim()),
            Err(_) => Ok(0),
        }
    }
}
