//! Classification metrics, ranking curves, chronological folds and the
//! keyword baseline.

use crate::preprocess::{porter::stem, split_words};
use crate::types::Label;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("ranking metrics need at least one positive and one negative example")]
    SingleClass,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Degenerate {
    /// No positive predictions, so precision is reported as 0.
    pub precision: bool,
    /// No positive examples, so recall is reported as 0.
    pub recall: bool,
    pub f1: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when only one class is present.
    pub auc: Option<f64>,
    pub pr_points: Vec<(f64, f64)>,
    pub degenerate: Degenerate,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Confusion counts and derived metrics with `score ≥ threshold` as positive.
/// Panics when the inputs differ in length.
pub fn metrics(scores: &[f64], labels: &[bool], threshold: f64) -> EvalReport {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let n = scores.len();
    let (accuracy, _) = ratio(tp + tn, n);
    let (precision, p_undef) = ratio(tp, tp + fp);
    let (recall, r_undef) = ratio(tp, tp + fn_);
    let f1_undef = p_undef || r_undef || precision + recall == 0.0;
    let f1 = if f1_undef {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    EvalReport {
        n,
        tp,
        fp,
        tn,
        fn_,
        threshold,
        accuracy,
        precision,
        recall,
        f1,
        auc: auc_roc(scores, labels).ok(),
        pr_points: pr_curve(scores, labels).unwrap_or_default(),
        degenerate: Degenerate {
            precision: p_undef,
            recall: r_undef,
            f1: f1_undef,
        },
    }
}

/// Groups of equal scores in ascending order as `(start, end)` index ranges
/// over `order`.
fn tie_groups(scores: &[f64], order: &[usize]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        if i == order.len() || scores[order[i]] != scores[order[start]] {
            groups.push((start, i));
            start = i;
        }
    }
    groups
}

fn class_counts(labels: &[bool]) -> Result<(u64, u64), MetricError> {
    let pos = labels.iter().filter(|&&y| y).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve as the Mann-Whitney statistic with midranks.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the positive rank sum stays integral under midranks.
    let mut twice_rank_sum: u64 = 0;
    for (start, end) in tie_groups(scores, &order) {
        let positives = order[start..end].iter().filter(|&&i| labels[i]).count() as u64;
        // 1-based ranks start+1 ..= end average to (start + 1 + end) / 2
        twice_rank_sum += positives * (start as u64 + 1 + end as u64);
    }
    let twice_u = twice_rank_sum - pos * (pos + 1);
    Ok(twice_u as f64 / (2 * pos * neg) as f64)
}

/// `(recall, precision)` after admitting each distinct score, highest first.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>, MetricError> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let (pos, _) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0u64, 0u64);
    Ok(tie_groups(scores, &order)
        .into_iter()
        .map(|(start, end)| {
            for &i in &order[start..end] {
                tp += labels[i] as u64;
                seen += 1;
            }
            (tp as f64 / pos as f64, tp as f64 / seen as f64)
        })
        .collect())
}

/// One chronological cross-validation split, as indices into the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Sorts by `(date, id)` and cuts into `n` contiguous sets, earliest sets
/// taking the remainder. Split `i` tests on set `i` and trains on the rest.
pub fn chrono_folds(keys: &[(i64, &str)], n: usize) -> Vec<Fold> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let n = n.max(1);
    let (base, extra) = (keys.len() / n, keys.len() % n);
    let mut bounds = vec![0];
    for i in 0..n {
        bounds.push(bounds[i] + base + usize::from(i < extra));
    }
    (0..n)
        .map(|i| {
            let test = order[bounds[i]..bounds[i + 1]].to_vec();
            let train = order[..bounds[i]]
                .iter()
                .chain(&order[bounds[i + 1]..])
                .copied()
                .collect();
            Fold { fold: i + 1, train, test }
        })
        .collect()
}

/// Stable when the message mentions a bug or fix after lowercasing and stemming.
pub fn keyword_baseline(message: &str) -> Label {
    let lower = message.to_lowercase();
    let hit = lower.contains("bug-fix")
        || split_words(&lower).any(|w| {
            let s = stem(&w);
            s == "bug" || s == "fix"
        });
    Label::from_bool(hit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std_population: f64,
    /// Zero when fewer than two values.
    pub std_sample: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    if values.is_empty() {
        return Summary {
            mean: 0.0,
            std_population: 0.0,
            std_sample: 0.0,
        };
    }
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Summary {
        mean,
        std_population: (ss / n).sqrt(),
        std_sample: if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 },
    }
}
