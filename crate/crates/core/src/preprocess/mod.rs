//! Turns raw commits into fixed-shape token-index tensors.
//!
//! Messages are tag-stripped, split, stop-worded and stemmed. Code changes
//! are comment/string stripped, annotated with their line kind, and lexed
//! into tokens where only keywords, frequent external function names and
//! punctuation survive verbatim.

mod cstrip;
mod functions;
pub mod lexer;
mod line_kind;
mod message;
pub mod porter;

pub use cstrip::{strip_comments_strings, StripWarning, Stripped};
pub use functions::{
    build_function_table, definitions_in_line, local_definitions, FunctionNameTable, FunctionScope,
    MIN_CALLS,
};
pub use line_kind::classify_line_kinds;
pub use message::{
    message_words, normalize_message, split_words, strip_tags, PAD_TOKEN, STOP_WORDS, UNK_TOKEN,
};

use crate::ingest::parse_unified_diff;
use crate::types::{CodeLine, FileDiff, Hunk, Label, LineKind, LineSign, RawCommit};
use crate::vocab::{Vocabularies, PAD};
use lexer::{is_keyword, lex, TokenKind};
use serde::{Deserialize, Serialize};

/// Extents of a preprocessed patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchShape {
    pub msg_len: usize,
    pub files: usize,
    pub hunks: usize,
    pub lines: usize,
    pub words: usize,
}

impl Default for PatchShape {
    fn default() -> Self {
        PatchShape {
            msg_len: 512,
            files: 5,
            hunks: 8,
            lines: 10,
            words: 120,
        }
    }
}

impl PatchShape {
    pub fn code_len(&self) -> usize {
        self.files * self.file_len()
    }

    /// Indices in one file's block of `hunks × lines × words`.
    pub fn file_len(&self) -> usize {
        self.hunks * self.lines * self.words
    }

    pub fn offset(&self, file: usize, hunk: usize, line: usize, word: usize) -> usize {
        ((file * self.hunks + hunk) * self.lines + line) * self.words + word
    }
}

/// A code token with the kind of the line it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotatedToken {
    pub base: String,
    pub kind: LineKind,
}

impl AnnotatedToken {
    /// Vocabulary spelling, `base@kind`.
    pub fn text(&self) -> String {
        format!("{}@{}", self.base, self.kind.tag())
    }
}

/// Lexes one stripped code line. Keywords and retained function calls stay
/// verbatim, other identifiers become `IDENT`, numbers `NUM`.
pub fn tokenize_code_line(line: &CodeLine, scope: &FunctionScope<'_>) -> Vec<AnnotatedToken> {
    let toks = lex(&line.text);
    toks.iter()
        .enumerate()
        .map(|(i, t)| {
            let base = match t.kind {
                TokenKind::Ident if is_keyword(t.text) => t.text.to_string(),
                TokenKind::Ident => {
                    let call = toks.get(i + 1).is_some_and(|n| n.text == "(");
                    if call && scope.keeps(t.text) {
                        t.text.to_string()
                    } else {
                        "IDENT".to_string()
                    }
                }
                TokenKind::Number => "NUM".to_string(),
                TokenKind::Literal if t.text.starts_with('\'') => "''".to_string(),
                TokenKind::Literal => "\"\"".to_string(),
                TokenKind::Punct => t.text.to_string(),
            };
            AnnotatedToken {
                base,
                kind: line.kind,
            }
        })
        .collect()
}

/// Annotated token spellings per changed line of one hunk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizedHunk {
    pub removed: Vec<Vec<String>>,
    pub added: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedFile {
    pub path: String,
    pub hunks: Vec<TokenizedHunk>,
}

/// A patch after text processing but before vocabulary lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPatch {
    pub commit_id: String,
    pub label: Option<Label>,
    /// Stemmed message words, unpadded.
    pub message: Vec<String>,
    /// C/header files with at least one hunk, in diff order.
    pub files: Vec<TokenizedFile>,
}

impl TokenizedPatch {
    pub fn code_tokens(&self) -> impl Iterator<Item = &str> {
        self.files
            .iter()
            .flat_map(|f| &f.hunks)
            .flat_map(|h| h.removed.iter().chain(&h.added))
            .flatten()
            .map(String::as_str)
    }
}

/// Stripped text and kind for each old-side and new-side line of a hunk,
/// computed from the hunk's own lines.
fn hunk_local_lines(h: &Hunk, side: LineSign) -> Vec<(String, LineKind)> {
    let text: Vec<&str> = h
        .lines
        .iter()
        .filter(|l| l.sign == LineSign::Context || l.sign == side)
        .map(|l| l.text.as_str())
        .collect();
    let stripped = strip_comments_strings(&text.join("\n")).text;
    let kinds = classify_line_kinds(&stripped);
    let stripped_lines: Vec<&str> = stripped.split('\n').collect();
    h.lines
        .iter()
        .filter(|l| l.sign == LineSign::Context || l.sign == side)
        .enumerate()
        .filter(|(_, l)| l.sign == side)
        .map(|(i, _)| {
            (
                stripped_lines.get(i).copied().unwrap_or("").to_string(),
                kinds.get(i).copied().unwrap_or(LineKind::Normal),
            )
        })
        .collect()
}

/// Stripped text and kinds for a whole file snapshot.
struct SnapshotView {
    lines: Vec<String>,
    kinds: Vec<LineKind>,
}

impl SnapshotView {
    fn new(text: &str) -> Self {
        let stripped = strip_comments_strings(text).text;
        let kinds = classify_line_kinds(&stripped);
        SnapshotView {
            lines: stripped.split('\n').map(str::to_string).collect(),
            kinds,
        }
    }

    fn line(&self, number: usize) -> Option<(String, LineKind)> {
        let i = number.checked_sub(1)?;
        Some((self.lines.get(i)?.clone(), *self.kinds.get(i)?))
    }
}

fn side_lines(
    h: &Hunk,
    side: LineSign,
    snapshot: Option<&SnapshotView>,
) -> Vec<(String, LineKind)> {
    let lines = match side {
        LineSign::Removed => &h.removed,
        _ => &h.added,
    };
    match snapshot {
        Some(view) => {
            let local = hunk_local_lines(h, side);
            lines
                .iter()
                .zip(local)
                .map(|(l, fallback)| view.line(l.line_number).unwrap_or(fallback))
                .collect()
        }
        None => hunk_local_lines(h, side),
    }
}

fn tokenize_file(file: &FileDiff, commit: &RawCommit, table: &FunctionNameTable) -> TokenizedFile {
    let defs = local_definitions(file, commit);
    let scope = table.scoped(&defs);
    let snap = commit.snapshot(&file.path);
    let before = snap.and_then(|s| s.before.as_deref()).map(SnapshotView::new);
    let after = snap.and_then(|s| s.after.as_deref()).map(SnapshotView::new);
    let to_tokens = |lines: Vec<(String, LineKind)>| -> Vec<Vec<String>> {
        lines
            .into_iter()
            .map(|(text, kind)| {
                let line = CodeLine {
                    line_number: 0,
                    text,
                    kind,
                };
                tokenize_code_line(&line, &scope)
                    .iter()
                    .map(AnnotatedToken::text)
                    .collect::<Vec<_>>()
            })
            .filter(|toks| !toks.is_empty())
            .collect()
    };
    let hunks = file
        .hunks
        .iter()
        .map(|h| TokenizedHunk {
            removed: to_tokens(side_lines(h, LineSign::Removed, before.as_ref())),
            added: to_tokens(side_lines(h, LineSign::Added, after.as_ref())),
        })
        .collect();
    TokenizedFile {
        path: file.path.clone(),
        hunks,
    }
}

/// Text-level preprocessing of one commit. Total: an unparseable diff yields no files.
pub fn tokenize_patch(c: &RawCommit, table: &FunctionNameTable) -> TokenizedPatch {
    let message = message_words(&strip_tags(&c.message()));
    let files = parse_unified_diff(&c.diff_text)
        .unwrap_or_default()
        .iter()
        .filter(|f| f.language_relevant && !f.hunks.is_empty())
        .map(|f| tokenize_file(f, c, table))
        .collect();
    TokenizedPatch {
        commit_id: c.commit_id.clone(),
        label: c.label,
        message,
        files,
    }
}

/// Token indices of one patch in fixed shape; `0` is padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessedPatch {
    pub commit_id: String,
    pub label: Option<Label>,
    pub shape: PatchShape,
    pub message: Vec<u32>,
    /// `files × hunks × lines × words`, row-major.
    pub removed: Vec<u32>,
    pub added: Vec<u32>,
}

impl PreprocessedPatch {
    /// One file's removed or added block.
    pub fn file_block(&self, file: usize, removed: bool) -> &[u32] {
        let n = self.shape.file_len();
        let src = if removed { &self.removed } else { &self.added };
        &src[file * n..(file + 1) * n]
    }

    /// Same patch with removed and added code exchanged.
    pub fn swapped(&self) -> Self {
        PreprocessedPatch {
            removed: self.added.clone(),
            added: self.removed.clone(),
            ..self.clone()
        }
    }
}

/// Looks tokens up in the vocabularies and truncates/pads to `shape`.
pub fn index_patch(p: &TokenizedPatch, vocabs: &Vocabularies, shape: PatchShape) -> PreprocessedPatch {
    let mut message = vec![PAD; shape.msg_len];
    for (slot, w) in message.iter_mut().zip(&p.message) {
        *slot = vocabs.message.index_of(w);
    }
    let mut removed = vec![PAD; shape.code_len()];
    let mut added = vec![PAD; shape.code_len()];
    for (f, file) in p.files.iter().take(shape.files).enumerate() {
        for (h, hunk) in file.hunks.iter().take(shape.hunks).enumerate() {
            for (dst, lines) in [(&mut removed, &hunk.removed), (&mut added, &hunk.added)] {
                for (n, line) in lines.iter().take(shape.lines).enumerate() {
                    for (w, tok) in line.iter().take(shape.words).enumerate() {
                        dst[shape.offset(f, h, n, w)] = vocabs.code.index_of(tok);
                    }
                }
            }
        }
    }
    PreprocessedPatch {
        commit_id: p.commit_id.clone(),
        label: p.label,
        shape,
        message,
        removed,
        added,
    }
}

/// Full preprocessing of one commit against built vocabularies.
pub fn assemble_tensors(c: &RawCommit, vocabs: &Vocabularies, shape: PatchShape) -> PreprocessedPatch {
    index_patch(&tokenize_patch(c, &vocabs.functions), vocabs, shape)
}
