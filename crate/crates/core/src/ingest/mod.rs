//! Commit ingestion: export parsing, eligibility filtering, stable labeling
//! and dataset balancing.

mod balance;
pub mod diff;
mod eligibility;
pub mod export;
mod stable;

pub use balance::{build_balanced_dataset, changed_lines};
pub use diff::{parse_unified_diff, render_unified_diff};
pub use eligibility::{check_eligibility, EligibilityReport, IneligibleReason, MAX_DIFF_LINES};
pub use export::{parse_commit_jsonl, parse_commit_stream, read_commits, write_commit_jsonl, write_commit_stream};
pub use stable::{back_links, extract_stable_evidence, label_commit, parse_rc_ids, StableEvidence};

use crate::types::{Label, RawCommit};

/// Labels every eligible mainline commit against the stable evidence.
pub fn label_eligible(mainline: &[RawCommit], ev: &StableEvidence) -> Vec<(RawCommit, Label)> {
    mainline
        .iter()
        .filter(|c| check_eligibility(c).eligible)
        .map(|c| (c.clone(), label_commit(c, ev)))
        .collect()
}
