//! Unified diff parsing.
//!
//! Accepts `git diff` output (with `diff --git` headers) as well as plain
//! `---`/`+++` diffs. Hunk bodies are consumed by the counts in the `@@`
//! header; a hunk that ends early is accepted with whatever lines it has.

use crate::error::{Error, Result};
use crate::types::{is_c_source_path, CodeLine, DiffLine, FileDiff, Hunk, LineSign};
use regex::Regex;
use std::fmt::Write as _;
use std::sync::LazyLock;

static HUNK_HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$").expect("valid regex")
});

struct FileBuilder {
    old_path: Option<String>,
    new_path: Option<String>,
    hunks: Vec<Hunk>,
}

impl FileBuilder {
    fn finish(self) -> FileDiff {
        let path = self
            .new_path
            .clone()
            .or_else(|| self.old_path.clone())
            .unwrap_or_default();
        FileDiff {
            language_relevant: is_c_source_path(&path),
            path,
            old_path: self.old_path,
            new_path: self.new_path,
            hunks: self.hunks,
        }
    }
}

fn strip_side_prefix(raw: &str) -> Option<String> {
    // classic diff appends a tab and a timestamp
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    if raw == "/dev/null" {
        return None;
    }
    let p = raw
        .strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw);
    Some(p.to_string())
}

fn parse_git_header(rest: &str) -> (Option<String>, Option<String>) {
    // "a/<old> b/<new>"; split at the last " b/" so paths with spaces survive
    match rest.rfind(" b/") {
        Some(i) => {
            let old = rest[..i].trim();
            let new = rest[i + 1..].trim();
            (strip_side_prefix(old), strip_side_prefix(new))
        }
        None => (None, None),
    }
}

fn parse_count(m: Option<regex::Match<'_>>, line: usize) -> Result<usize> {
    match m {
        None => Ok(1),
        Some(m) => m.as_str().parse().map_err(|_| Error::Diff {
            line,
            message: format!("count {:?} out of range", m.as_str()),
        }),
    }
}

/// Parses one `@@` header into `(old_start, old_count, new_start, new_count, section)`.
pub fn parse_hunk_header(
    text: &str,
    line: usize,
) -> Result<(usize, usize, usize, usize, String)> {
    let caps = HUNK_HEADER.captures(text).ok_or_else(|| Error::Diff {
        line,
        message: format!("malformed hunk header {text:?}"),
    })?;
    let num = |i: usize| parse_count(caps.get(i), line);
    let old_start = num(1)?;
    let old_count = num(2)?;
    let new_start = num(3)?;
    let new_count = num(4)?;
    let section = caps.get(5).map_or("", |m| m.as_str()).trim().to_string();
    Ok((old_start, old_count, new_start, new_count, section))
}

/// Splits `diff_text` into per-file hunks.
pub fn parse_unified_diff(diff_text: &str) -> Result<Vec<FileDiff>> {
    let lines: Vec<&str> = diff_text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    // a trailing newline yields one empty element
    let n = if diff_text.ends_with('\n') {
        lines.len() - 1
    } else {
        lines.len()
    };

    let mut files: Vec<FileDiff> = Vec::new();
    let mut current: Option<FileBuilder> = None;
    let mut i = 0;
    while i < n {
        let line = lines[i];
        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(f) = current.take() {
                files.push(f.finish());
            }
            let (old_path, new_path) = parse_git_header(rest);
            current = Some(FileBuilder {
                old_path,
                new_path,
                hunks: Vec::new(),
            });
            i += 1;
            continue;
        }
        if line.starts_with("--- ") && i + 1 < n && lines[i + 1].starts_with("+++ ") {
            let old_path = strip_side_prefix(&line[4..]);
            let new_path = strip_side_prefix(&lines[i + 1][4..]);
            match current.as_mut() {
                Some(f) if f.hunks.is_empty() => {
                    f.old_path = old_path;
                    f.new_path = new_path;
                }
                _ => {
                    if let Some(f) = current.take() {
                        files.push(f.finish());
                    }
                    current = Some(FileBuilder {
                        old_path,
                        new_path,
                        hunks: Vec::new(),
                    });
                }
            }
            i += 2;
            continue;
        }
        if line.starts_with("new file mode") {
            if let Some(f) = current.as_mut() {
                f.old_path = None;
            }
        } else if line.starts_with("deleted file mode") {
            if let Some(f) = current.as_mut() {
                f.new_path = None;
            }
        } else if let Some(p) = line.strip_prefix("rename from ") {
            if let Some(f) = current.as_mut() {
                f.old_path = Some(p.to_string());
            }
        } else if let Some(p) = line.strip_prefix("rename to ") {
            if let Some(f) = current.as_mut() {
                f.new_path = Some(p.to_string());
            }
        } else if line.starts_with("@@") {
            let (old_start, old_count, new_start, new_count, section) =
                parse_hunk_header(line, i + 1)?;
            let file = current.as_mut().ok_or_else(|| Error::Diff {
                line: i + 1,
                message: "hunk outside of any file".into(),
            })?;
            i += 1;
            let mut hunk = Hunk {
                index: file.hunks.len() + 1,
                old_start,
                old_count,
                new_start,
                new_count,
                section,
                lines: Vec::new(),
                removed: Vec::new(),
                added: Vec::new(),
            };
            let (mut old_rem, mut new_rem) = (old_count, new_count);
            let (mut old_no, mut new_no) = (old_start, new_start);
            while i < n && (old_rem > 0 || new_rem > 0) {
                let body = lines[i];
                let (sign, text) = match body.as_bytes().first() {
                    None => (LineSign::Context, ""),
                    Some(b' ') => (LineSign::Context, &body[1..]),
                    Some(b'-') if old_rem > 0 => (LineSign::Removed, &body[1..]),
                    Some(b'+') if new_rem > 0 => (LineSign::Added, &body[1..]),
                    Some(b'\\') => {
                        i += 1;
                        continue;
                    }
                    _ => break,
                };
                match sign {
                    LineSign::Context => {
                        old_rem = old_rem.saturating_sub(1);
                        new_rem = new_rem.saturating_sub(1);
                        old_no += 1;
                        new_no += 1;
                    }
                    LineSign::Removed => {
                        hunk.removed.push(CodeLine::new(old_no, text));
                        old_rem -= 1;
                        old_no += 1;
                    }
                    LineSign::Added => {
                        hunk.added.push(CodeLine::new(new_no, text));
                        new_rem -= 1;
                        new_no += 1;
                    }
                }
                hunk.lines.push(DiffLine {
                    sign,
                    text: text.to_string(),
                });
                i += 1;
            }
            file.hunks.push(hunk);
            continue;
        }
        i += 1;
    }
    if let Some(f) = current.take() {
        files.push(f.finish());
    }
    Ok(files)
}

/// Writes file diffs back out in `git diff` form.
pub fn render_unified_diff(files: &[FileDiff]) -> String {
    let mut out = String::new();
    for f in files {
        let old = f.old_path.as_deref().unwrap_or(&f.path);
        let new = f.new_path.as_deref().unwrap_or(&f.path);
        let _ = writeln!(out, "diff --git a/{old} b/{new}");
        match (&f.old_path, &f.new_path) {
            (None, Some(_)) => out.push_str("new file mode 100644\n"),
            (Some(_), None) => out.push_str("deleted file mode 100644\n"),
            _ => {}
        }
        if f.hunks.is_empty() {
            continue;
        }
        match &f.old_path {
            Some(p) => {
                let _ = writeln!(out, "--- a/{p}");
            }
            None => out.push_str("--- /dev/null\n"),
        }
        match &f.new_path {
            Some(p) => {
                let _ = writeln!(out, "+++ b/{p}");
            }
            None => out.push_str("+++ /dev/null\n"),
        }
        for h in &f.hunks {
            let _ = write!(
                out,
                "@@ -{},{} +{},{} @@",
                h.old_start, h.old_count, h.new_start, h.new_count
            );
            if !h.section.is_empty() {
                let _ = write!(out, " {}", h.section);
            }
            out.push('\n');
            for l in &h.lines {
                out.push(l.sign.as_char());
                out.push_str(&l.text);
                out.push('\n');
            }
        }
    }
    out
}

/// Lines inside hunks that start with `-`, `+` or ` `, i.e. the size "as reported by diff".
pub fn reported_diff_lines(files: &[FileDiff]) -> usize {
    files
        .iter()
        .flat_map(|f| &f.hunks)
        .map(|h| h.lines.len())
        .sum()
}

/// Number of removed plus added lines.
pub fn changed_line_count(files: &[FileDiff]) -> usize {
    files
        .iter()
        .flat_map(|f| &f.hunks)
        .map(Hunk::changed_lines)
        .sum()
}
