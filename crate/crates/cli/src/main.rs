//! `patchnet`: ingest commits, preprocess, train, predict and evaluate.
//!
//! Exit status is 0 on success, 1 on usage errors and 2 on data or runtime
//! errors.

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

/// Marks an error caused by how the tool was invoked.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "patchnet", version, about = "Identify Linux kernel patches suitable for stable trees")]
pub struct Cli {
    /// Flat `key = value` file overriding model and training defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for every random choice; falls back to the config file, then PATCHNET_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Sources {
    /// Mainline commits (JSONL or record stream).
    #[arg(long)]
    pub mainline: PathBuf,
    /// Stable-branch commits used as labeling evidence.
    #[arg(long)]
    pub stable: PathBuf,
    /// Optional list of 40-hex ids of patches posted to stable review threads.
    #[arg(long)]
    pub rc_ids: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Label eligible mainline commits and build a balanced dataset.
    Ingest {
        #[command(flatten)]
        sources: Sources,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label eligible mainline commits without balancing.
    Label {
        #[command(flatten)]
        sources: Sources,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tokenize a dataset and write index tensors plus vocabularies.
    Preprocess {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write vocabularies built from this dataset.
        #[arg(long, required_unless_present = "vocab")]
        vocab_out: Option<PathBuf>,
        /// Index against existing vocabularies instead (e.g. for a test split).
        #[arg(long, conflicts_with = "vocab_out")]
        vocab: Option<PathBuf>,
        /// Abstract every function name to a generic identifier.
        #[arg(long)]
        no_function_names: bool,
    },
    /// Train a classifier on preprocessed tensors.
    Train {
        #[arg(long)]
        tensors: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// full, code-only or message-only.
        #[arg(long, default_value = "full")]
        variant: String,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Write per-epoch losses as JSON.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Score commits or preprocessed tensors with a trained checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Tensor file or commits (JSONL or record stream).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Compute metrics for one or more score files.
    Evaluate {
        /// Score file from `predict` or `baseline`; repeat for several runs.
        #[arg(long, required = true)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Precision-recall points as CSV (single score file only).
        #[arg(long)]
        pr_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Score a dataset with the bug/fix keyword rule.
    Baseline {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut a dataset into chronological cross-validation splits.
    Folds {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value = "folds")]
        out_dir: PathBuf,
        /// Also write each split's train and test commits as JSONL.
        #[arg(long)]
        materialize: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
