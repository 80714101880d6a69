use super::diff::{parse_unified_diff, reported_diff_lines};
use crate::types::RawCommit;

/// Largest diff, changed plus context lines, admitted to the dataset.
pub const MAX_DIFF_LINES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IneligibleReason {
    MergeCommit,
    NoCOrHFileModified,
    OnlyAddsOrRemovesFiles,
    TooLong(usize),
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EligibilityReport {
    pub eligible: bool,
    pub reasons: Vec<IneligibleReason>,
}

pub fn check_eligibility(c: &RawCommit) -> EligibilityReport {
    let mut reasons = Vec::new();
    if c.parent_ids.len() > 1 {
        reasons.push(IneligibleReason::MergeCommit);
    }
    match parse_unified_diff(&c.diff_text) {
        Err(e) => reasons.push(IneligibleReason::Other(e.to_string())),
        Ok(files) => {
            let touched: Vec<_> = files.iter().filter(|f| !f.hunks.is_empty()).collect();
            let modified: Vec<_> = touched.iter().filter(|f| f.is_modification()).collect();
            if !touched.is_empty() && modified.is_empty() {
                reasons.push(IneligibleReason::OnlyAddsOrRemovesFiles);
            } else if !modified.iter().any(|f| f.language_relevant) {
                reasons.push(IneligibleReason::NoCOrHFileModified);
            }
            let size = reported_diff_lines(&files);
            if size > MAX_DIFF_LINES {
                reasons.push(IneligibleReason::TooLong(size));
            }
        }
    }
    EligibilityReport {
        eligible: reasons.is_empty(),
        reasons,
    }
}
