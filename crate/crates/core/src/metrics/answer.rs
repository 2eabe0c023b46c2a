use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::qa::normalize_answer;

/// Word-overlap precision, recall and F1 of one predicted answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Aggregate answer quality over a batch of questions.
///
/// `precision`, `recall` and `f1` are means of the per-question values;
/// `accuracy` is `n_correct / n_total` under normalized exact match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaScore {
    pub n_correct: usize,
    pub n_total: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 over normalized answer words. Common words are
/// counted as a multiset intersection.
pub fn qa_f1(predicted: &str, gold: &str) -> TokenF1 {
    let pred = normalize_answer(predicted);
    let gold = normalize_answer(gold);

    let mut gold_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for tok in &gold {
        *gold_counts.entry(tok.as_str()).or_insert(0) += 1;
    }
    let mut common = 0usize;
    for tok in &pred {
        if let Some(c) = gold_counts.get_mut(tok.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }

    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(common, pred.len());
    let recall = ratio(common, gold.len());
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    TokenF1 { precision, recall, f1 }
}

/// Normalized exact match.
pub fn exact_match(predicted: &str, gold: &str) -> bool {
    normalize_answer(predicted) == normalize_answer(gold)
}

fn check_batch<P: AsRef<str>, G: AsRef<str>>(predictions: &[P], golds: &[G]) -> Result<(), MetricError> {
    if predictions.len() != golds.len() {
        return Err(MetricError::LengthMismatch { predictions: predictions.len(), golds: golds.len() });
    }
    if predictions.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    Ok(())
}

/// Fraction of predictions that exactly match their gold answer after
/// normalization.
pub fn accuracy<P: AsRef<str>, G: AsRef<str>>(predictions: &[P], golds: &[G]) -> Result<f64, MetricError> {
    Ok(score_answers(predictions, golds)?.accuracy)
}

pub fn score_answers<P: AsRef<str>, G: AsRef<str>>(predictions: &[P], golds: &[G]) -> Result<QaScore, MetricError> {
    check_batch(predictions, golds)?;
    let n_total = predictions.len();
    let mut n_correct = 0;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for (pred, gold) in predictions.iter().zip(golds) {
        if exact_match(pred.as_ref(), gold.as_ref()) {
            n_correct += 1;
        }
        let s = qa_f1(pred.as_ref(), gold.as_ref());
        p += s.precision;
        r += s.recall;
        f += s.f1;
    }
    let n = n_total as f64;
    Ok(QaScore { n_correct, n_total, accuracy: n_correct as f64 / n, precision: p / n, recall: r / n, f1: f / n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_overlap() {
        let s = qa_f1("oil canvas", "oil on canvas");
        assert_eq!(s.precision, 1.0);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.f1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn identity_and_empty() {
        let s = qa_f1("Leonardo da Vinci", "leonardo da vinci");
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = qa_f1("", "x");
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn common_words_are_a_multiset() {
        // one shared "red", not two
        let s = qa_f1("red red", "red blue");
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 0.5);
    }

    #[test]
    fn accuracy_counts_normalized_exact_matches() {
        let preds = ["a", "b", "c", "d", "e", "f", "g", "x", "y", "z"];
        let golds = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
        assert!((accuracy(&preds, &golds).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(accuracy(&golds, &golds).unwrap(), 1.0);
        assert_eq!(accuracy(&["The Louvre"], &["louvre"]).unwrap(), 1.0);
    }

    #[test]
    fn batch_errors() {
        let empty: [&str; 0] = [];
        assert_eq!(accuracy(&empty, &empty), Err(MetricError::EmptyBatch));
        assert_eq!(accuracy(&["a"], &["a", "b"]), Err(MetricError::LengthMismatch { predictions: 1, golds: 2 }));
    }
}
