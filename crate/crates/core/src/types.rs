//! Domain types shared across the pipeline: commits, parsed diffs and labels.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Class of a patch: propagated to a stable tree or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "stable")]
    Stable,
    #[serde(rename = "non-stable")]
    NonStable,
}

impl Label {
    pub fn from_bool(stable: bool) -> Self {
        if stable {
            Label::Stable
        } else {
            Label::NonStable
        }
    }

    pub fn is_stable(self) -> bool {
        self == Label::Stable
    }

    /// 1.0 for stable, 0.0 otherwise; the target value of the loss.
    pub fn target(self) -> f64 {
        if self.is_stable() {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Stable => f.write_str("stable"),
            Label::NonStable => f.write_str("non-stable"),
        }
    }
}

/// Before/after contents of one file touched by a commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSnapshot {
    pub path: String,
    #[serde(default)]
    pub before: Option<String>,
    #[serde(default)]
    pub after: Option<String>,
}

/// One version-control commit as ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCommit {
    pub commit_id: String,
    #[serde(default, rename = "parents")]
    pub parent_ids: Vec<String>,
    pub author_name: String,
    #[serde(default)]
    pub author_email: String,
    /// Seconds since the epoch, UTC.
    pub date: i64,
    pub subject: String,
    #[serde(default)]
    pub body: String,
    #[serde(default, rename = "diff")]
    pub diff_text: String,
    #[serde(default, rename = "files", skip_serializing_if = "Option::is_none")]
    pub file_snapshots: Option<Vec<FileSnapshot>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl RawCommit {
    /// Subject and body joined as a single message.
    pub fn message(&self) -> String {
        if self.body.is_empty() {
            self.subject.clone()
        } else {
            format!("{}\n{}", self.subject, self.body)
        }
    }

    pub fn snapshot(&self, path: &str) -> Option<&FileSnapshot> {
        self.file_snapshots
            .as_ref()
            .and_then(|files| files.iter().find(|f| f.path == path))
    }
}

/// Category of a code line with respect to error checking and handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LineKind {
    ErrorChecking,
    ErrorHandling,
    Normal,
}

impl LineKind {
    /// Suffix folded into code tokens.
    pub fn tag(self) -> &'static str {
        match self {
            LineKind::ErrorChecking => "chk",
            LineKind::ErrorHandling => "hnd",
            LineKind::Normal => "nrm",
        }
    }
}

/// A removed or added line of a hunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeLine {
    /// 1-based line in the old file for removed lines, the new file for added lines.
    pub line_number: usize,
    pub text: String,
    pub kind: LineKind,
}

impl CodeLine {
    pub fn new(line_number: usize, text: impl Into<String>) -> Self {
        CodeLine {
            line_number,
            text: text.into(),
            kind: LineKind::Normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSign {
    Context,
    Removed,
    Added,
}

impl LineSign {
    pub fn as_char(self) -> char {
        match self {
            LineSign::Context => ' ',
            LineSign::Removed => '-',
            LineSign::Added => '+',
        }
    }
}

/// A hunk body line in diff order, including context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffLine {
    pub sign: LineSign,
    pub text: String,
}

/// A block of changes introduced by one `@@` header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    /// 1-based ordinal within its file.
    pub index: usize,
    pub old_start: usize,
    pub old_count: usize,
    pub new_start: usize,
    pub new_count: usize,
    /// Text after the closing `@@`, usually the enclosing function header.
    pub section: String,
    pub lines: Vec<DiffLine>,
    pub removed: Vec<CodeLine>,
    pub added: Vec<CodeLine>,
}

impl Hunk {
    /// Number of `-` and `+` lines.
    pub fn changed_lines(&self) -> usize {
        self.removed.len() + self.added.len()
    }
}

/// Changes made to one file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDiff {
    pub path: String,
    /// `None` when the old side is `/dev/null`.
    pub old_path: Option<String>,
    /// `None` when the new side is `/dev/null`.
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
    pub language_relevant: bool,
}

impl FileDiff {
    /// True when both sides name a real file.
    pub fn is_modification(&self) -> bool {
        self.old_path.is_some() && self.new_path.is_some()
    }
}

pub fn is_c_source_path(path: &str) -> bool {
    path.ends_with(".c") || path.ends_with(".h")
}

/// A set of labeled commits with a description of how it was produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub items: Vec<(RawCommit, Label)>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub description: String,
    pub warnings: Vec<String>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Commits with their label stored in [`RawCommit::label`].
    pub fn into_commits(self) -> Vec<RawCommit> {
        self.items
            .into_iter()
            .map(|(mut c, l)| {
                c.label = Some(l);
                c
            })
            .collect()
    }
}

/// A single broken invariant found by [`validate_commit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    CommitIdLength(usize),
    CommitIdCharset,
    ParentIdCharset(String),
    SubjectNewline,
    NegativeDate(i64),
    EmptyFileDiff(String),
    HunkOrdinal { path: String, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CommitIdLength(n) => write!(f, "commit_id length {n}, expected 40"),
            Violation::CommitIdCharset => f.write_str("commit_id is not lowercase hex"),
            Violation::ParentIdCharset(p) => write!(f, "parent id {p:?} is not hex"),
            Violation::SubjectNewline => f.write_str("subject newline"),
            Violation::NegativeDate(d) => write!(f, "negative date {d}"),
            Violation::EmptyFileDiff(p) => write!(f, "file {p} has no hunks"),
            Violation::HunkOrdinal {
                path,
                expected,
                found,
            } => write!(f, "file {path}: hunk ordinal {found}, expected {expected}"),
        }
    }
}

pub fn is_hex40(s: &str) -> bool {
    s.len() == 40 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Checks every structural invariant of a commit. An empty result means valid.
pub fn validate_commit(c: &RawCommit) -> Vec<Violation> {
    let mut out = Vec::new();
    if c.commit_id.len() != 40 {
        out.push(Violation::CommitIdLength(c.commit_id.len()));
    }
    if !c
        .commit_id
        .bytes()
        .all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
    {
        out.push(Violation::CommitIdCharset);
    }
    for p in &c.parent_ids {
        if p.is_empty() || !p.bytes().all(|b| b.is_ascii_hexdigit()) {
            out.push(Violation::ParentIdCharset(p.clone()));
        }
    }
    if c.subject.contains('\n') || c.subject.contains('\r') {
        out.push(Violation::SubjectNewline);
    }
    if c.date < 0 {
        out.push(Violation::NegativeDate(c.date));
    }
    out
}

/// Checks the structure of parsed file diffs: nonempty hunks with ordinals 1..=n.
pub fn validate_file_diffs(files: &[FileDiff]) -> Vec<Violation> {
    let mut out = Vec::new();
    for f in files {
        if f.hunks.is_empty() {
            out.push(Violation::EmptyFileDiff(f.path.clone()));
        }
        for (i, h) in f.hunks.iter().enumerate() {
            if h.index != i + 1 {
                out.push(Violation::HunkOrdinal {
                    path: f.path.clone(),
                    expected: i + 1,
                    found: h.index,
                });
            }
        }
    }
    out
}
