use super::diff::{changed_line_count, parse_unified_diff};
use crate::types::{Label, LabeledDataset, Provenance, RawCommit};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Removed plus added lines; falls back to a raw `+`/`-` line count when the diff does not parse.
pub fn changed_lines(c: &RawCommit) -> usize {
    match parse_unified_diff(&c.diff_text) {
        Ok(files) => changed_line_count(&files),
        Err(_) => c
            .diff_text
            .lines()
            .filter(|l| {
                (l.starts_with('+') && !l.starts_with("+++"))
                    || (l.starts_with('-') && !l.starts_with("---"))
            })
            .count(),
    }
}

/// Keeps every stable commit and pairs each with the unused non-stable
/// commit closest in changed-line count.
///
/// Stable commits are visited in a seeded shuffle of their (date, id) order;
/// ties in size distance go to the earlier date, then the smaller id. The
/// result is sorted by (date, id) and does not depend on input order.
pub fn build_balanced_dataset(labeled: &[(RawCommit, Label)], seed: u64) -> LabeledDataset {
    let mut sorted: Vec<&(RawCommit, Label)> = labeled.iter().collect();
    sorted.sort_by(|a, b| {
        (a.0.date, &a.0.commit_id, a.1).cmp(&(b.0.date, &b.0.commit_id, b.1))
    });
    let mut seen = HashSet::new();
    sorted.retain(|(c, _)| seen.insert(c.commit_id.clone()));

    let mut stable: Vec<&RawCommit> = Vec::new();
    let mut pool: BTreeMap<usize, BTreeSet<(i64, String, usize)>> = BTreeMap::new();
    let mut non_stable: Vec<&RawCommit> = Vec::new();
    for (c, l) in &sorted {
        match l {
            Label::Stable => stable.push(c),
            Label::NonStable => {
                let idx = non_stable.len();
                non_stable.push(c);
                pool.entry(changed_lines(c))
                    .or_default()
                    .insert((c.date, c.commit_id.clone(), idx));
            }
        }
    }

    let mut order: Vec<usize> = (0..stable.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut chosen: Vec<usize> = Vec::new();
    for &si in &order {
        if pool.is_empty() {
            break;
        }
        let size = changed_lines(stable[si]);
        let below = pool.range(..=size).next_back().map(|(k, v)| (*k, v.first().cloned()));
        let above = pool.range(size..).next().map(|(k, v)| (*k, v.first().cloned()));
        let pick = match (below, above) {
            (Some((kb, Some(b))), Some((ka, Some(a)))) => {
                let (db, da) = (size - kb, ka - size);
                if db < da || (db == da && (b.0, &b.1) <= (a.0, &a.1)) {
                    (kb, b)
                } else {
                    (ka, a)
                }
            }
            (Some((k, Some(e))), _) | (_, Some((k, Some(e)))) => (k, e),
            _ => break,
        };
        let (key, entry) = pick;
        let bucket = pool.get_mut(&key).expect("bucket exists");
        bucket.remove(&entry);
        if bucket.is_empty() {
            pool.remove(&key);
        }
        chosen.push(entry.2);
    }

    let mut warnings = Vec::new();
    if non_stable.len() < stable.len() {
        warnings.push(format!(
            "only {} non-stable commits for {} stable commits",
            non_stable.len(),
            stable.len()
        ));
    }
    let mut items: Vec<(RawCommit, Label)> = stable
        .iter()
        .map(|c| ((*c).clone(), Label::Stable))
        .chain(chosen.iter().map(|&i| (non_stable[i].clone(), Label::NonStable)))
        .collect();
    items.sort_by(|a, b| (a.0.date, &a.0.commit_id).cmp(&(b.0.date, &b.0.commit_id)));
    let n_non = chosen.len();
    LabeledDataset {
        items,
        provenance: Provenance {
            description: format!(
                "balanced by changed-line count: {} stable, {} non-stable, seed {}",
                stable.len(),
                n_non,
                seed
            ),
            warnings,
        },
    }
}
