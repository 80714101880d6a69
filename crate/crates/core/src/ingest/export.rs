//! Commit export readers and writers.
//!
//! The record format, one record per commit:
//!
//! ```text
//! \x01COMMIT\x01
//! id: <40-hex>
//! parents: <hex> <hex> ...
//! author: <name>
//! email: <address>
//! date: <epoch seconds>
//!
//! <message>
//! \x01DIFF\x01
//! <unified diff>
//! ```
//!
//! The JSONL form has one [`RawCommit`] object per line.

use crate::error::{Error, Result};
use crate::types::RawCommit;

pub const COMMIT_MARKER: &str = "\u{1}COMMIT\u{1}";
pub const DIFF_MARKER: &str = "\u{1}DIFF\u{1}";

/// Byte offsets of every line that consists of exactly `marker`.
fn marker_offsets(text: &str, marker: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let bare = line.trim_end_matches('\n').trim_end_matches('\r');
        if bare == marker {
            out.push(pos);
        }
        pos += line.len();
    }
    out
}

fn split_message(message: &str) -> (String, String) {
    let mut lines = message.lines();
    let mut subject = String::new();
    for l in lines.by_ref() {
        if !l.trim().is_empty() {
            subject = l.trim().to_string();
            break;
        }
    }
    let rest: Vec<&str> = lines.collect();
    let body = rest.join("\n");
    (subject, body.trim_matches('\n').trim_end().to_string())
}

fn parse_record(text: &str, base: usize) -> Result<RawCommit> {
    let bad = |offset: usize, message: String| Error::Record {
        offset: base + offset,
        message,
    };
    let mut commit_id = None;
    let mut parents = Vec::new();
    let mut author = None;
    let mut email = String::new();
    let mut date = None;

    let mut pos = 0;
    let mut header_done = false;
    for line in text.split_inclusive('\n') {
        let start = pos;
        pos += line.len();
        let l = line.trim_end_matches(['\n', '\r']);
        if l.is_empty() {
            header_done = true;
            break;
        }
        let (key, value) = l
            .split_once(':')
            .ok_or_else(|| bad(start, format!("expected `key: value`, found {l:?}")))?;
        let value = value.trim();
        match key.trim() {
            "id" => commit_id = Some(value.to_ascii_lowercase()),
            "parents" => parents = value.split_whitespace().map(str::to_string).collect(),
            "author" => author = Some(value.to_string()),
            "email" => email = value.to_string(),
            "date" => {
                let d: i64 = value
                    .parse()
                    .map_err(|_| bad(start, format!("date {value:?} is not epoch seconds")))?;
                date = Some(d);
            }
            other => return Err(bad(start, format!("unknown header field {other:?}"))),
        }
    }
    if !header_done {
        return Err(bad(0, "header not terminated by a blank line".into()));
    }
    let commit_id = commit_id.ok_or_else(|| bad(0, "missing `id:`".into()))?;
    let author_name = author.ok_or_else(|| bad(0, "missing `author:`".into()))?;
    let date = date.ok_or_else(|| bad(0, "missing `date:`".into()))?;

    let rest = &text[pos..];
    let (message, diff_text) = match marker_offsets(rest, DIFF_MARKER).first() {
        Some(&at) => {
            let after = &rest[at..];
            let diff_start = after.find('\n').map_or(after.len(), |i| i + 1);
            (&rest[..at], after[diff_start..].to_string())
        }
        None => (rest, String::new()),
    };
    let (subject, body) = split_message(message);
    Ok(RawCommit {
        commit_id,
        parent_ids: parents,
        author_name,
        author_email: email,
        date,
        subject,
        body,
        diff_text,
        file_snapshots: None,
        label: None,
    })
}

/// Parses a concatenation of commit records.
pub fn parse_commit_stream(text: &str) -> Result<Vec<RawCommit>> {
    let starts = marker_offsets(text, COMMIT_MARKER);
    let leading = starts.first().copied().unwrap_or(text.len());
    if !text[..leading].trim().is_empty() {
        let skip = text.len() - text.trim_start().len();
        return Err(Error::Record {
            offset: skip,
            message: "text before the first commit marker".into(),
        });
    }
    let mut out = Vec::with_capacity(starts.len());
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(text.len());
        let record = &text[start..end];
        let header = record.find('\n').map_or(record.len(), |i| i + 1);
        out.push(parse_record(&record[header..], start + header)?);
    }
    Ok(out)
}

/// Serializes commits in the record format read by [`parse_commit_stream`].
pub fn write_commit_stream(commits: &[RawCommit]) -> String {
    let mut out = String::new();
    for c in commits {
        out.push_str(COMMIT_MARKER);
        out.push('\n');
        out.push_str(&format!("id: {}\n", c.commit_id));
        out.push_str(&format!("parents: {}\n", c.parent_ids.join(" ")));
        out.push_str(&format!("author: {}\n", c.author_name));
        out.push_str(&format!("email: {}\n", c.author_email));
        out.push_str(&format!("date: {}\n\n", c.date));
        out.push_str(&c.subject);
        out.push('\n');
        if !c.body.is_empty() {
            out.push('\n');
            out.push_str(&c.body);
            out.push('\n');
        }
        out.push_str(DIFF_MARKER);
        out.push('\n');
        out.push_str(&c.diff_text);
    }
    out
}

pub fn parse_commit_jsonl(text: &str) -> Result<Vec<RawCommit>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| Error::JsonRecord { line: i + 1, source })
        })
        .collect()
}

pub fn write_commit_jsonl(commits: &[RawCommit]) -> Result<String> {
    let mut out = String::new();
    for c in commits {
        out.push_str(&serde_json::to_string(c)?);
        out.push('\n');
    }
    Ok(out)
}

/// Reads either format, choosing JSONL when the first non-blank byte is `{`.
pub fn read_commits(text: &str) -> Result<Vec<RawCommit>> {
    if text.trim_start().starts_with('{') {
        parse_commit_jsonl(text)
    } else {
        parse_commit_stream(text)
    }
}
