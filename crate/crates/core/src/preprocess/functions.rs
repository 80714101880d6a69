//! Corpus-wide table of frequently called function names.

use super::cstrip::strip_comments_strings;
use super::lexer::{is_keyword, lex, Token, TokenKind};
use crate::ingest::parse_unified_diff;
use crate::types::{FileDiff, RawCommit};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Minimum number of call sites for a name to be kept verbatim.
pub const MIN_CALLS: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionNameTable {
    pub retained: BTreeSet<String>,
}

impl FunctionNameTable {
    /// A table that retains nothing, so every identifier is abstracted.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn scoped<'a>(&'a self, local_definitions: &'a HashSet<String>) -> FunctionScope<'a> {
        FunctionScope {
            table: self,
            local_definitions,
        }
    }
}

/// A table view that hides names defined in the file being tokenized.
#[derive(Debug, Clone, Copy)]
pub struct FunctionScope<'a> {
    table: &'a FunctionNameTable,
    local_definitions: &'a HashSet<String>,
}

impl FunctionScope<'_> {
    pub fn keeps(&self, name: &str) -> bool {
        self.table.retained.contains(name) && !self.local_definitions.contains(name)
    }
}

/// Call sites `name(` in a token stream, keywords excluded.
pub fn call_sites<'a>(toks: &'a [Token<'a>]) -> impl Iterator<Item = &'a str> + 'a {
    toks.windows(2).filter_map(|w| {
        (w[0].kind == TokenKind::Ident && w[1].text == "(" && !is_keyword(w[0].text))
            .then_some(w[0].text)
    })
}

/// Names defined on a definition-shaped line: unindented, not a
/// preprocessor line or a declaration ending in `;`, with the name directly
/// preceded by a type word or `*`.
pub fn definitions_in_line(line: &str, out: &mut HashSet<String>) {
    if line.is_empty() || line.starts_with(|c: char| c.is_whitespace()) || line.starts_with('#') {
        return;
    }
    if line.trim_end().ends_with(';') {
        return;
    }
    let toks = lex(line);
    for (i, w) in toks.windows(2).enumerate() {
        if w[0].kind == TokenKind::Ident && w[1].text == "(" && !is_keyword(w[0].text) && i > 0 {
            let prev = &toks[i - 1];
            if prev.kind == TokenKind::Ident || prev.text == "*" {
                out.insert(w[0].text.to_string());
            }
            return;
        }
    }
}

/// Functions defined in the file, from snapshots when present and
/// otherwise from the diff's context lines and hunk section headers.
pub fn local_definitions(file: &FileDiff, commit: &RawCommit) -> HashSet<String> {
    let mut defs = HashSet::new();
    if let Some(snap) = commit.snapshot(&file.path) {
        for text in [&snap.before, &snap.after].into_iter().flatten() {
            for line in strip_comments_strings(text).text.lines() {
                definitions_in_line(line, &mut defs);
            }
        }
        return defs;
    }
    for h in &file.hunks {
        definitions_in_line(&h.section, &mut defs);
        for l in &h.lines {
            definitions_in_line(&l.text, &mut defs);
        }
    }
    defs
}

/// Counts call sites over every changed line of the corpus and keeps names
/// called at least [`MIN_CALLS`] times.
pub fn build_function_table<'a, I>(corpus: I) -> FunctionNameTable
where
    I: IntoIterator<Item = &'a RawCommit>,
{
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for c in corpus {
        let Ok(files) = parse_unified_diff(&c.diff_text) else {
            continue;
        };
        for f in files.iter().filter(|f| f.language_relevant) {
            for h in &f.hunks {
                for l in h.removed.iter().chain(&h.added) {
                    let stripped = strip_comments_strings(&l.text).text;
                    let toks = lex(&stripped);
                    for name in call_sites(&toks) {
                        *counts.entry(name.to_string()).or_default() += 1;
                    }
                }
            }
        }
    }
    FunctionNameTable {
        retained: counts
            .into_iter()
            .filter(|(_, n)| *n >= MIN_CALLS)
            .map(|(name, _)| name)
            .collect(),
    }
}
