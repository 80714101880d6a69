#![allow(dead_code)]

pub mod gradcheck;
pub mod reference;
pub mod toy;

use patchnet::ingest::parse_commit_stream;
use patchnet::RawCommit;

/// The three example kernel patches (bug fix, refactoring, minor
/// performance fix), reconstructed as an export stream.
pub fn example_patches() -> Vec<RawCommit> {
    parse_commit_stream(include_str!("../fixtures/example_patches.txt")).expect("fixture parses")
}

/// Hand-labeled snippets: `(title, source, labels)` with one of `N`/`C`/`H` per line.
pub fn line_kind_fixtures() -> Vec<(String, String, Vec<char>)> {
    let text = include_str!("../fixtures/line_kinds.txt");
    let mut out: Vec<(String, Vec<String>, Vec<char>)> = Vec::new();
    for line in text.lines() {
        if let Some(title) = line.strip_prefix("## ") {
            out.push((title.to_string(), Vec::new(), Vec::new()));
            continue;
        }
        let cur = out.last_mut().expect("snippet title first");
        let mut chars = line.chars();
        let tag = chars.next().expect("tagged line");
        chars.next();
        cur.1.push(chars.as_str().to_string());
        cur.2.push(tag);
    }
    out.into_iter()
        .map(|(t, lines, tags)| (t, lines.join("\n"), tags))
        .collect()
}
