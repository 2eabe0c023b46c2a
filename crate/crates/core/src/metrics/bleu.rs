use std::collections::BTreeMap;

use super::{tokenize, MetricError};

/// BLEU with unigrams only: clipped unigram precision times the brevity
/// penalty.
///
/// Each candidate word count is clipped by its highest count in any single
/// reference. The effective reference length is the one closest to the
/// candidate length, preferring the shorter on ties.
pub fn bleu1<S: AsRef<str>>(candidate: &str, references: &[S]) -> Result<f64, MetricError> {
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r.as_ref())).collect();
    if refs.iter().all(Vec::is_empty) {
        return Err(MetricError::NoReferences);
    }
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return Ok(0.0);
    }

    let mut max_ref_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &refs {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for tok in r {
            *counts.entry(tok.as_str()).or_insert(0) += 1;
        }
        for (tok, c) in counts {
            let slot = max_ref_counts.entry(tok).or_insert(0);
            *slot = (*slot).max(c);
        }
    }

    let mut cand_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for tok in &cand {
        *cand_counts.entry(tok.as_str()).or_insert(0) += 1;
    }
    let clipped: usize = cand_counts.iter().map(|(tok, &c)| c.min(max_ref_counts.get(tok).copied().unwrap_or(0))).sum();

    let c = cand.len();
    let r = closest_ref_len(c, refs.iter().map(Vec::len));
    let precision = clipped as f64 / c as f64;
    let brevity = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok(brevity * precision)
}

fn closest_ref_len(cand_len: usize, ref_lens: impl Iterator<Item = usize>) -> usize {
    ref_lens.min_by_key(|&len| (len.abs_diff(cand_len), len)).expect("at least one reference")
}
