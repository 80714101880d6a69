//! Stable-tree evidence and labeling of mainline commits.

use crate::types::{is_hex40, Label, RawCommit};
use regex::Regex;
use std::collections::BTreeSet;
use std::sync::LazyLock;

static BACK_LINK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\bcommit\s+([0-9a-f]{40})\s+upstream\b").expect("valid regex")
});

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StableEvidence {
    pub back_links: BTreeSet<String>,
    pub author_subject_pairs: BTreeSet<(String, String)>,
    pub rc_commit_ids: BTreeSet<String>,
}

/// All mainline ids referenced as `commit <id> upstream` in `message`.
pub fn back_links(message: &str) -> impl Iterator<Item = String> + '_ {
    BACK_LINK
        .captures_iter(message)
        .map(|c| c[1].to_ascii_lowercase())
}

pub fn extract_stable_evidence<'a, I>(stable_commits: I, rc_ids: &BTreeSet<String>) -> StableEvidence
where
    I: IntoIterator<Item = &'a RawCommit>,
{
    let mut ev = StableEvidence {
        rc_commit_ids: rc_ids
            .iter()
            .map(|s| s.trim().to_ascii_lowercase())
            .filter(|s| is_hex40(s))
            .collect(),
        ..Default::default()
    };
    for c in stable_commits {
        ev.back_links.extend(back_links(&c.subject));
        ev.back_links.extend(back_links(&c.body));
        ev.author_subject_pairs
            .insert((c.author_name.trim().to_string(), c.subject.trim().to_string()));
    }
    ev
}

pub fn label_commit(c: &RawCommit, ev: &StableEvidence) -> Label {
    let id = c.commit_id.to_ascii_lowercase();
    let stable = ev.back_links.contains(&id)
        || ev.rc_commit_ids.contains(&id)
        || ev
            .author_subject_pairs
            .contains(&(c.author_name.trim().to_string(), c.subject.trim().to_string()));
    Label::from_bool(stable)
}

/// Reads one 40-hex id per line; blank lines and `#` comments are skipped.
pub fn parse_rc_ids(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_ascii_lowercase)
        .filter(|l| is_hex40(l))
        .collect()
}
