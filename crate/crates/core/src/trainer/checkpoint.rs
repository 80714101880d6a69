//! Model checkpoints.
//!
//! Layout: magic `PNET`, u32 version, u32 header length, a JSON header
//! (hyperparameters, variant, vocabularies, parameter manifest), then each
//! parameter as little-endian f32 in manifest order.

use super::binio::{put_len, put_u32, Reader};
use crate::error::{Error, Result};
use crate::model::{HyperParams, Model, Variant};
use crate::nnkit::{ParamStore, Tensor};
use crate::vocab::{VocabFile, Vocabularies};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PNET";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VocabSizes {
    message: usize,
    code: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    hyperparams: HyperParams,
    variant: Variant,
    vocab_sizes: VocabSizes,
    vocab: VocabFile,
    params: Vec<ManifestEntry>,
}

/// A trained model with the vocabularies its inputs were indexed against.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub vocabs: Vocabularies,
}

pub fn encode_checkpoint(model: &Model, vocabs: &Vocabularies) -> Result<Vec<u8>> {
    let (mv, cv) = model.vocab_sizes();
    if (mv, cv) != (vocabs.message.len(), vocabs.code.len()) {
        return Err(Error::Shape(format!(
            "model embeds {mv}/{cv} words but vocabularies hold {}/{}",
            vocabs.message.len(),
            vocabs.code.len()
        )));
    }
    let header = Header {
        hyperparams: model.hp.clone(),
        variant: model.variant,
        vocab_sizes: VocabSizes { message: mv, code: cv },
        vocab: vocabs.to_file(),
        params: model
            .params
            .iter()
            .map(|(_, name, t)| ManifestEntry {
                name: name.to_string(),
                shape: t.shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_len(&mut out, json.len())?;
    out.extend_from_slice(&json);
    for (_, _, t) in model.params.iter() {
        for &x in &t.data {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(buf, "checkpoint");
    r.expect_magic(CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let n = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.bytes(n)?)?;
    let vocabs = Vocabularies::from_file(header.vocab);
    let sizes = (vocabs.message.len(), vocabs.code.len());
    if sizes != (header.vocab_sizes.message, header.vocab_sizes.code) {
        return Err(Error::Shape(format!(
            "header vocabulary sizes {}/{} disagree with stored vocabularies {}/{}",
            header.vocab_sizes.message, header.vocab_sizes.code, sizes.0, sizes.1
        )));
    }
    let mut store = ParamStore::new();
    for e in header.params {
        let len = e.shape.iter().product();
        let data = r.f32s(len)?.into_iter().map(f64::from).collect();
        store.add(e.name, Tensor::from_vec(&e.shape, data));
    }
    r.finish()?;
    let model = Model::from_params(header.hyperparams, header.variant, store)?;
    if model.vocab_sizes() != sizes {
        return Err(Error::Shape(format!(
            "embedding tables {:?} do not match vocabulary sizes {sizes:?}",
            model.vocab_sizes()
        )));
    }
    Ok(Checkpoint { model, vocabs })
}

pub fn save_checkpoint(model: &Model, vocabs: &Vocabularies, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, vocabs)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
