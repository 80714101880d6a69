//! The hierarchical CNN classifier: a message module, a code module built
//! from per-line and per-hunk convolutions, and a fully connected head.

use crate::error::{Error, Result};
use crate::nnkit::{dropout_mask, Grads, ParamId, ParamStore, Tape, Tensor, Var};
use crate::preprocess::{PatchShape, PreprocessedPatch};
use crate::types::Label;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Architecture and regularization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub d_m: usize,
    pub d_c: usize,
    pub filter_sizes: Vec<usize>,
    pub n_filters: usize,
    pub fc_size: usize,
    pub msg_len: usize,
    pub files: usize,
    pub hunks: usize,
    pub lines: usize,
    pub words: usize,
    pub dropout: f64,
    pub lambda: f64,
    pub threshold: f64,
    /// One line module for both removed and added code.
    pub share_line_filters: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            d_m: 50,
            d_c: 50,
            filter_sizes: vec![1, 2],
            n_filters: 64,
            fc_size: 100,
            msg_len: 512,
            files: 5,
            hunks: 8,
            lines: 10,
            words: 120,
            dropout: 0.5,
            lambda: 1e-5,
            threshold: 0.5,
            share_line_filters: true,
        }
    }
}

impl HyperParams {
    /// Width of a pooled feature vector: one value per filter per size.
    pub fn pooled_dim(&self) -> usize {
        self.n_filters * self.filter_sizes.len()
    }

    /// Line embedding width `E`.
    pub fn line_dim(&self) -> usize {
        self.pooled_dim()
    }

    pub fn shape(&self) -> PatchShape {
        PatchShape {
            msg_len: self.msg_len,
            files: self.files,
            hunks: self.hunks,
            lines: self.lines,
            words: self.words,
        }
    }

    pub fn with_shape(mut self, s: PatchShape) -> Self {
        self.msg_len = s.msg_len;
        self.files = s.files;
        self.hunks = s.hunks;
        self.lines = s.lines;
        self.words = s.words;
        self
    }

    /// Width of the concatenated patch vector for `variant`.
    pub fn feature_dim(&self, variant: Variant) -> usize {
        let m = self.pooled_dim();
        let c = self.files * 2 * self.pooled_dim();
        match variant {
            Variant::Full => m + c,
            Variant::CodeOnly => c,
            Variant::MessageOnly => m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_m", self.d_m),
            ("d_c", self.d_c),
            ("n_filters", self.n_filters),
            ("fc_size", self.fc_size),
            ("files", self.files),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.filter_sizes.is_empty() || self.filter_sizes.contains(&0) {
            return Err(Error::Config("filter sizes must be positive".into()));
        }
        let k = *self.filter_sizes.iter().max().unwrap_or(&1);
        for (name, v) in [
            ("msg_len", self.msg_len),
            ("hunks", self.hunks),
            ("words", self.words),
        ] {
            if v < k {
                return Err(Error::Config(format!("{name} must be at least the largest filter size {k}")));
            }
        }
        if self.lines == 0 {
            return Err(Error::Config("lines must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("threshold must be in (0, 1)".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// Which inputs reach the classifier head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Full,
    /// Code changes only.
    CodeOnly,
    /// Commit message only.
    MessageOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    C,
    M,
    /// Full model with every function name abstracted.
    NN,
}

/// Wiring for an ablation: the network variant and whether preprocessing
/// keeps frequent function names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wiring {
    pub variant: Variant,
    pub function_names: bool,
}

pub fn ablation_variant(which: Ablation) -> Wiring {
    match which {
        Ablation::C => Wiring {
            variant: Variant::CodeOnly,
            function_names: true,
        },
        Ablation::M => Wiring {
            variant: Variant::MessageOnly,
            function_names: true,
        },
        Ablation::NN => Wiring {
            variant: Variant::Full,
            function_names: false,
        },
    }
}

/// A probability that the patch is stable and the thresholded label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub z: f64,
    pub label: Label,
}

impl Score {
    pub fn new(z: f64, threshold: f64) -> Self {
        Score {
            z,
            label: Label::from_bool(z >= threshold),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Removed,
    Added,
}

type ConvBank = Vec<(ParamId, ParamId)>;

#[derive(Debug, Clone, PartialEq)]
struct ParamIds {
    msg_embed: ParamId,
    code_embed: ParamId,
    msg_conv: ConvBank,
    line_conv: [ConvBank; 2],
    hunk_conv: [ConvBank; 2],
    w_h: ParamId,
    b_h: ParamId,
    w_o: ParamId,
}

/// Parameter tensors with the names and shapes derived from the
/// hyperparameters, variant and vocabulary sizes.
pub fn parameter_layout(
    hp: &HyperParams,
    variant: Variant,
    msg_vocab: usize,
    code_vocab: usize,
) -> Vec<(String, Vec<usize>)> {
    let mut out = vec![
        ("message.embedding".to_string(), vec![msg_vocab, hp.d_m]),
        ("code.embedding".to_string(), vec![code_vocab, hp.d_c]),
    ];
    let f = hp.n_filters;
    let bank = |out: &mut Vec<(String, Vec<usize>)>, prefix: &str, tail: &[usize]| {
        for &k in &hp.filter_sizes {
            let mut shape = vec![f, k];
            shape.extend_from_slice(tail);
            out.push((format!("{prefix}.conv{k}.weight"), shape));
            out.push((format!("{prefix}.conv{k}.bias"), vec![f]));
        }
    };
    bank(&mut out, "message", &[hp.d_m]);
    if hp.share_line_filters {
        bank(&mut out, "line", &[hp.d_c]);
    } else {
        bank(&mut out, "line.removed", &[hp.d_c]);
        bank(&mut out, "line.added", &[hp.d_c]);
    }
    bank(&mut out, "hunk.removed", &[hp.lines, hp.line_dim()]);
    bank(&mut out, "hunk.added", &[hp.lines, hp.line_dim()]);
    out.push(("fc.weight".into(), vec![hp.fc_size, hp.feature_dim(variant)]));
    out.push(("fc.bias".into(), vec![hp.fc_size]));
    out.push(("out.weight".into(), vec![hp.fc_size]));
    out
}

/// Forward-pass mode: inference is deterministic, training applies dropout
/// drawn from the supplied stream.
pub enum Mode<'r> {
    Infer,
    Train(&'r mut ChaCha8Rng),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hp: HyperParams,
    pub variant: Variant,
    pub params: ParamStore,
    ids: ParamIds,
}

impl Model {
    /// A zero-initialized model.
    pub fn new(hp: HyperParams, variant: Variant, msg_vocab: usize, code_vocab: usize) -> Result<Self> {
        hp.validate()?;
        let mut params = ParamStore::new();
        for (name, shape) in parameter_layout(&hp, variant, msg_vocab, code_vocab) {
            params.add(name, Tensor::zeros(&shape));
        }
        Self::from_params(hp, variant, params)
    }

    /// Uniform `[-0.1, 0.1]` initialization from `seed`.
    pub fn initialized(
        hp: HyperParams,
        variant: Variant,
        msg_vocab: usize,
        code_vocab: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut m = Self::new(hp, variant, msg_vocab, code_vocab)?;
        m.params.init_uniform(0.1, seed);
        Ok(m)
    }

    /// Wraps an existing store, checking names and shapes against the layout.
    pub fn from_params(hp: HyperParams, variant: Variant, params: ParamStore) -> Result<Self> {
        hp.validate()?;
        let (mv, cv) = match (params.id("message.embedding"), params.id("code.embedding")) {
            (Some(m), Some(c)) => (params.tensor(m).shape[0], params.tensor(c).shape[0]),
            _ => return Err(Error::Shape("missing embedding tables".into())),
        };
        let layout = parameter_layout(&hp, variant, mv, cv);
        if layout.len() != params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, found {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape), (_, pname, t)) in layout.iter().zip(params.iter()) {
            if name != pname || *shape != t.shape {
                return Err(Error::Shape(format!(
                    "parameter {pname} {:?} does not match expected {name} {shape:?}",
                    t.shape
                )));
            }
        }
        let id = |n: &str| params.id(n).expect("layout checked");
        let bank = |prefix: &str| -> ConvBank {
            hp.filter_sizes
                .iter()
                .map(|k| (id(&format!("{prefix}.conv{k}.weight")), id(&format!("{prefix}.conv{k}.bias"))))
                .collect()
        };
        let line_conv = if hp.share_line_filters {
            [bank("line"), bank("line")]
        } else {
            [bank("line.removed"), bank("line.added")]
        };
        let ids = ParamIds {
            msg_embed: id("message.embedding"),
            code_embed: id("code.embedding"),
            msg_conv: bank("message"),
            line_conv,
            hunk_conv: [bank("hunk.removed"), bank("hunk.added")],
            w_h: id("fc.weight"),
            b_h: id("fc.bias"),
            w_o: id("out.weight"),
        };
        Ok(Model {
            hp,
            variant,
            params,
            ids,
        })
    }

    pub fn vocab_sizes(&self) -> (usize, usize) {
        (
            self.params.tensor(self.ids.msg_embed).shape[0],
            self.params.tensor(self.ids.code_embed).shape[0],
        )
    }

    fn check_patch(&self, p: &PreprocessedPatch) {
        let s = self.hp.shape();
        assert_eq!(p.message.len(), s.msg_len, "message length does not match the model");
        assert_eq!(p.removed.len(), s.code_len(), "removed code shape does not match the model");
        assert_eq!(p.added.len(), s.code_len(), "added code shape does not match the model");
    }

    /// Records the forward pass for one patch and returns the score node.
    pub fn forward<'p>(&'p self, tape: &mut Tape<'p>, p: &PreprocessedPatch, mode: &mut Mode<'_>) -> Var {
        self.check_patch(p);
        let mut fwd = Forward::new(self, tape);
        let mut parts = Vec::new();
        if self.variant != Variant::CodeOnly {
            let e_m = fwd.message(&p.message);
            parts.push(fwd.dropout(e_m, mode));
        }
        if self.variant != Variant::MessageOnly {
            for f in 0..self.hp.files {
                for side in [Side::Removed, Side::Added] {
                    let block = p.file_block(f, side == Side::Removed);
                    let e = fwd.side(block, side);
                    parts.push(fwd.dropout(e, mode));
                }
            }
        }
        let dim = self.hp.feature_dim(self.variant);
        let e = fwd.tape.concat(&parts, &[dim]);
        let (w_h, b_h, w_o) = (fwd.param(self.ids.w_h), fwd.param(self.ids.b_h), fwd.param(self.ids.w_o));
        let h = fwd.tape.dense(e, w_h, b_h);
        let h = fwd.dropout(h, mode);
        let s = fwd.tape.dot(h, w_o);
        fwd.tape.sigmoid(s)
    }

    pub fn predict(&self, p: &PreprocessedPatch, mode: &mut Mode<'_>) -> Score {
        let mut tape = Tape::new(&self.params);
        let z = self.forward(&mut tape, p, mode);
        Score::new(tape.scalar(z), self.hp.threshold)
    }

    /// Cross-entropy of one labeled patch and its gradients (penalty excluded).
    pub fn loss_and_grads(&self, p: &PreprocessedPatch, target: f64, mode: &mut Mode<'_>) -> (f64, Grads) {
        let mut tape = Tape::new(&self.params);
        let z = self.forward(&mut tape, p, mode);
        let loss = tape.bce(z, target);
        (tape.scalar(loss), tape.backward(loss))
    }

    /// Inference-mode message vector `e_m`.
    pub fn message_embedding(&self, tokens: &[u32]) -> Vec<f64> {
        let mut tape = Tape::new(&self.params);
        let v = Forward::new(self, &mut tape).message(tokens);
        tape.value(v).to_vec()
    }

    /// Inference-mode embedding of one code line (`words` indices).
    pub fn line_embedding(&self, tokens: &[u32], side: Side) -> Vec<f64> {
        let mut tape = Tape::new(&self.params);
        let v = Forward::new(self, &mut tape).line(tokens, side);
        tape.value(v).to_vec()
    }

    /// Inference-mode `e_r` or `e_a` of one file block (`hunks × lines × words`).
    pub fn code_side_embedding(&self, block: &[u32], side: Side) -> Vec<f64> {
        let mut tape = Tape::new(&self.params);
        let v = Forward::new(self, &mut tape).side(block, side);
        tape.value(v).to_vec()
    }

    /// Inference-mode `e_f = e_r ⊕ e_a`.
    pub fn file_embedding(&self, removed: &[u32], added: &[u32]) -> Vec<f64> {
        let mut e = self.code_side_embedding(removed, Side::Removed);
        e.extend(self.code_side_embedding(added, Side::Added));
        e
    }

    /// Inference-mode `e_c`, the concatenation of every file slot.
    pub fn code_embedding(&self, p: &PreprocessedPatch) -> Vec<f64> {
        (0..self.hp.files)
            .flat_map(|f| self.file_embedding(p.file_block(f, true), p.file_block(f, false)))
            .collect()
    }
}

/// Per-patch forward state: parameter nodes and deduplication caches.
struct Forward<'m, 'p, 't> {
    model: &'m Model,
    tape: &'t mut Tape<'p>,
    params: HashMap<ParamId, Var>,
    lines: HashMap<(usize, Vec<u32>), Var>,
    sides: HashMap<(Side, Vec<u32>), Var>,
}

impl<'m, 'p, 't> Forward<'m, 'p, 't> {
    fn new(model: &'m Model, tape: &'t mut Tape<'p>) -> Self {
        Forward {
            model,
            tape,
            params: HashMap::new(),
            lines: HashMap::new(),
            sides: HashMap::new(),
        }
    }

    fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.tape.param(id);
        self.params.insert(id, v);
        v
    }

    fn dropout(&mut self, v: Var, mode: &mut Mode<'_>) -> Var {
        match mode {
            Mode::Infer => v,
            Mode::Train(rng) => {
                let len = self.tape.value(v).len();
                let mask = dropout_mask(len, self.model.hp.dropout, *rng, true);
                self.tape.dropout(v, mask)
            }
        }
    }

    /// Convolution per filter size, row-wise max, concatenation.
    fn conv_pool(&mut self, input: Var, bank: &ConvBank) -> Var {
        let pooled: Vec<Var> = bank
            .iter()
            .map(|&(w, b)| {
                let (w, b) = (self.param(w), self.param(b));
                let c = self.tape.conv(input, w, b);
                self.tape.max_pool_rows(c)
            })
            .collect();
        let dim = self.model.hp.pooled_dim();
        self.tape.concat(&pooled, &[dim])
    }

    fn message(&mut self, tokens: &[u32]) -> Var {
        let m = self.tape.embed(self.model.ids.msg_embed, tokens);
        let bank = self.model.ids.msg_conv.clone();
        self.conv_pool(m, &bank)
    }

    fn line(&mut self, tokens: &[u32], side: Side) -> Var {
        let bank_ix = if self.model.hp.share_line_filters { 0 } else { side as usize };
        let key = (bank_ix, tokens.to_vec());
        if let Some(&v) = self.lines.get(&key) {
            return v;
        }
        let m = self.tape.embed(self.model.ids.code_embed, tokens);
        let bank = self.model.ids.line_conv[bank_ix].clone();
        let v = self.conv_pool(m, &bank);
        self.lines.insert(key, v);
        v
    }

    fn side(&mut self, block: &[u32], side: Side) -> Var {
        let key = (side, block.to_vec());
        if let Some(&v) = self.sides.get(&key) {
            return v;
        }
        let hp = &self.model.hp;
        let (h, n, l, e) = (hp.hunks, hp.lines, hp.words, hp.line_dim());
        let lines: Vec<Var> = block.chunks(l).map(|t| self.line(t, side)).collect();
        let b_hat = self.tape.concat(&lines, &[h, n, e]);
        let bank = self.model.ids.hunk_conv[side as usize].clone();
        let v = self.conv_pool(b_hat, &bank);
        self.sides.insert(key, v);
        v
    }
}
