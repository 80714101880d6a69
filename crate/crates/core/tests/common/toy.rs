//! Synthetic corpora: small planted-signal training sets and random patches.

use patchnet::model::{HyperParams, Mode, Model};
use patchnet::preprocess::{
    build_function_table, index_patch, tokenize_patch, FunctionNameTable, PatchShape, PreprocessedPatch,
};
use patchnet::trainer::TrainConfig;
use patchnet::vocab::Vocabularies;
use patchnet::{Label, RawCommit};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FILLER: [&str; 24] = [
    "driver", "update", "device", "memory", "queue", "register", "clock", "power", "table", "buffer",
    "handler", "config", "probe", "remove", "struct", "field", "value", "index", "pointer", "timer",
    "interrupt", "channel", "support", "module",
];

const STATEMENTS: [&str; 12] = [
    "x = y + 1;",
    "count++;",
    "ptr->field = val;",
    "len = strlen(name);",
    "val |= BIT(3);",
    "i = j * 2;",
    "dev->flags &= ~mask;",
    "size += sizeof(*hdr);",
    "reg = readl(base + 4);",
    "buf[i] = 0;",
    "total -= step;",
    "state = NEXT_STATE;",
];

pub const MESSAGE_MARKER: &str = "overflow";
pub const CODE_MARKER: &str = "mutex_unlock(&dev->lock);";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plant {
    Message,
    Code,
    /// Half the positives carry the message marker, half the code marker.
    Split,
}

pub fn toy_shape() -> PatchShape {
    PatchShape {
        msg_len: 16,
        files: 1,
        hunks: 2,
        lines: 4,
        words: 12,
    }
}

pub fn toy_hp() -> HyperParams {
    HyperParams {
        d_m: 8,
        d_c: 8,
        n_filters: 8,
        fc_size: 16,
        ..HyperParams::default()
    }
    .with_shape(toy_shape())
}

pub fn toy_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        max_epochs: 200,
        patience: 30,
        learning_rate: 5e-3,
        seed,
        ..TrainConfig::default()
    }
}

pub fn hex_id(rng: &mut impl Rng) -> String {
    (0..40).map(|_| char::from_digit(rng.random_range(0..16), 16).unwrap()).collect()
}

pub fn diff_for(path: &str, removed: &[String], added: &[String]) -> String {
    let mut d = format!(
        "diff --git a/{path} b/{path}\n--- a/{path}\n+++ b/{path}\n@@ -10,{} +10,{} @@\n",
        removed.len(),
        added.len()
    );
    for l in removed {
        d.push_str(&format!("-\t{l}\n"));
    }
    for l in added {
        d.push_str(&format!("+\t{l}\n"));
    }
    d
}

fn commit(rng: &mut ChaCha8Rng, date: i64, subject: String, diff: String, label: Label) -> RawCommit {
    RawCommit {
        commit_id: hex_id(rng),
        parent_ids: vec![hex_id(rng)],
        author_name: "Toy Author".into(),
        author_email: "toy@example.invalid".into(),
        date,
        subject,
        body: String::new(),
        diff_text: diff,
        file_snapshots: None,
        label: Some(label),
    }
}

/// `n` commits, half stable, where the label is carried only by the planted marker(s).
pub fn toy_commits(plant: Plant, n: usize, seed: u64) -> Vec<RawCommit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let stable = i % 2 == 0;
            let (in_msg, in_code) = match (plant, stable) {
                (_, false) => (false, false),
                (Plant::Message, true) => (true, false),
                (Plant::Code, true) => (false, true),
                (Plant::Split, true) => (i % 4 == 0, i % 4 != 0),
            };
            // in the split corpus everything but the markers is identical, so
            // a single-channel model cannot memorize the other channel's positives
            let varied = plant != Plant::Split;
            let mut words: Vec<&str> = if varied {
                (0..6).map(|_| *FILLER.choose(&mut rng).unwrap()).collect()
            } else {
                FILLER[..6].to_vec()
            };
            if in_msg {
                let at = rng.random_range(0..=words.len());
                words.insert(at, MESSAGE_MARKER);
            }
            let pick = |rng: &mut ChaCha8Rng, k: usize| -> Vec<String> {
                (0..k).map(|_| STATEMENTS.choose(rng).unwrap().to_string()).collect()
            };
            let (removed, mut added) = if varied {
                let (nr, na) = (rng.random_range(1..=2), rng.random_range(1..=2));
                (pick(&mut rng, nr), pick(&mut rng, na))
            } else {
                (vec![STATEMENTS[0].to_string()], vec![STATEMENTS[1].to_string()])
            };
            if in_code {
                let at = rng.random_range(0..=added.len());
                added.insert(at, CODE_MARKER.to_string());
            }
            let diff = diff_for("drivers/toy/core.c", &removed, &added);
            commit(&mut rng, 1_500_000_000 + i as i64, words.join(" "), diff, Label::from_bool(stable))
        })
        .collect()
}

pub struct Prepared {
    pub vocabs: Vocabularies,
    pub patches: Vec<PreprocessedPatch>,
}

/// Runs the preprocessing pipeline with vocabularies built from `commits`.
pub fn prepare(commits: &[RawCommit], function_names: bool, shape: PatchShape) -> Prepared {
    let table = if function_names {
        build_function_table(commits)
    } else {
        FunctionNameTable::empty()
    };
    let tokenized: Vec<_> = commits.iter().map(|c| tokenize_patch(c, &table)).collect();
    let vocabs = Vocabularies::from_training(&tokenized, table, 1);
    let patches = tokenized.iter().map(|t| index_patch(t, &vocabs, shape)).collect();
    Prepared { vocabs, patches }
}

pub fn accuracy(model: &Model, patches: &[PreprocessedPatch]) -> f64 {
    let correct = patches
        .iter()
        .filter(|p| Some(model.predict(p, &mut Mode::Infer).label) == p.label)
        .count();
    correct as f64 / patches.len() as f64
}

const FRAGMENTS: [&str; 26] = [
    "if (", ")", "{", "}", "return 1;", "return err;", "goto out;", "/*", "*/", "//", "\"", "'", "\\",
    "x", "kfree(p);", "0x1f", "1.5e-3", "->", "#define", "out:", "else", ";", "\u{e9}t\u{e9}", "\t", "@@",
    "+-",
];

fn random_line(rng: &mut ChaCha8Rng) -> String {
    let max = if rng.random_bool(0.05) { 200 } else { 12 };
    let n = rng.random_range(0..max);
    (0..n).map(|_| *FRAGMENTS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// A random, frequently malformed commit for fuzzing preprocessing.
pub fn random_commit(rng: &mut ChaCha8Rng) -> RawCommit {
    let mut diff = String::new();
    if rng.random_bool(0.1) {
        for _ in 0..rng.random_range(0..20) {
            diff.push_str(&random_line(rng));
            diff.push('\n');
        }
    } else {
        for f in 0..rng.random_range(0..9) {
            let ext = ["c", "h", "txt", "S"].choose(rng).unwrap();
            let path = format!("dir/file{f}.{ext}");
            diff.push_str(&format!("diff --git a/{path} b/{path}\n--- a/{path}\n+++ b/{path}\n"));
            for h in 0..rng.random_range(0..13) {
                let lines: Vec<(char, String)> = (0..rng.random_range(0..16))
                    .map(|_| (*[' ', '-', '+'].choose(rng).unwrap(), random_line(rng)))
                    .collect();
                let old = lines.iter().filter(|l| l.0 != '+').count();
                let new = lines.iter().filter(|l| l.0 != '-').count();
                diff.push_str(&format!("@@ -{},{old} +{},{new} @@ fn{h}()\n", 10 * h + 1, 10 * h + 1));
                for (sign, text) in lines {
                    diff.push(sign);
                    diff.push_str(&text);
                    diff.push('\n');
                }
            }
        }
    }
    let words = rng.random_range(0..700);
    let subject = (0..words)
        .map(|_| *FILLER.iter().chain(&["the", "fixes", "Cc:", "\u{e9}"]).collect::<Vec<_>>().choose(rng).unwrap())
        .copied()
        .collect::<Vec<_>>()
        .join(" ");
    let date = rng.random_range(0..2_000_000_000);
    let mut c = commit(rng, date, subject, diff, Label::NonStable);
    c.label = None;
    c
}

/// A patch of random indices below the vocabulary sizes; roughly a third
/// of the lines are padding, and the first two lines of each hunk repeat.
pub fn random_patch(rng: &mut ChaCha8Rng, shape: PatchShape, vocab: (usize, usize), label: Label) -> PreprocessedPatch {
    let mut message: Vec<u32> = (0..shape.msg_len).map(|_| rng.random_range(0..vocab.0 as u32)).collect();
    let cut = rng.random_range(1..=shape.msg_len);
    message[cut..].fill(0);
    let block = |rng: &mut ChaCha8Rng| -> Vec<u32> {
        let mut out = vec![0u32; shape.code_len()];
        for f in 0..shape.files {
            for h in 0..shape.hunks {
                for n in 0..shape.lines {
                    if rng.random_bool(0.33) {
                        continue;
                    }
                    let len = rng.random_range(1..=shape.words);
                    for w in 0..len {
                        out[shape.offset(f, h, n, w)] = rng.random_range(1..vocab.1 as u32);
                    }
                }
                if shape.lines > 1 {
                    let (a, b) = (shape.offset(f, h, 0, 0), shape.offset(f, h, 1, 0));
                    out.copy_within(a..a + shape.words, b);
                }
            }
        }
        out
    };
    let removed = block(rng);
    let added = block(rng);
    PreprocessedPatch {
        commit_id: hex_id(rng),
        label: Some(label),
        shape,
        message,
        removed,
        added,
    }
}
