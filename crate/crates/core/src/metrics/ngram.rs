use std::collections::BTreeMap;

use super::MetricError;

/// Multiset of n-grams: each n-gram mapped to its multiplicity.
pub type NgramCounts = BTreeMap<Vec<String>, usize>;

/// Lowercases `text` and splits it on every non-alphanumeric character.
/// Digits are kept; empty pieces are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|piece| !piece.is_empty()).map(str::to_lowercase).collect()
}

/// All contiguous n-grams of `tokens` with multiplicity.
pub fn ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> Result<NgramCounts, MetricError> {
    if n == 0 {
        return Err(MetricError::BadN(n));
    }
    let mut counts = NgramCounts::new();
    for window in tokens.windows(n) {
        let gram = window.iter().map(|t| t.as_ref().to_owned()).collect();
        *counts.entry(gram).or_insert(0) += 1;
    }
    Ok(counts)
}
