use super::{tokenize, MetricError};

/// Recall weight of the ROUGE-L F-measure, as used by captioning toolkits.
pub const ROUGE_BETA: f64 = 1.2;

/// Length of the longest common subsequence of two token sequences.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // rolling single row
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { above.max(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

/// ROUGE-L F-measure with `beta = 1.2`, maximized over references.
pub fn rouge_l<S: AsRef<str>>(candidate: &str, references: &[S]) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let cand = tokenize(candidate);
    let beta2 = ROUGE_BETA * ROUGE_BETA;
    let mut best = 0.0f64;
    for reference in references {
        let r = tokenize(reference.as_ref());
        if cand.is_empty() || r.is_empty() {
            continue;
        }
        let lcs = lcs_len(&cand, &r) as f64;
        let precision = lcs / cand.len() as f64;
        let recall = lcs / r.len() as f64;
        let denom = recall + beta2 * precision;
        if denom == 0.0 {
            continue;
        }
        let f = (1.0 + beta2) * precision * recall / denom;
        best = best.max(f);
    }
    Ok(best)
}
