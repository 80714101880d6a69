//! Stable-patch identification for the Linux kernel: commit ingestion,
//! preprocessing, a hierarchical CNN classifier, training and evaluation.

pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod nnkit;
pub mod preprocess;
pub mod trainer;
pub mod types;
pub mod vocab;

pub use error::{Error, Result};
pub use types::*;
