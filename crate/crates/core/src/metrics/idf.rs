use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ngrams, MetricError};

/// Document frequencies of every n-gram (orders `1..=max_n`) over a corpus.
///
/// `idf(t) = ln(N / df(t))`. Terms never seen at build time are treated as
/// if they occurred in exactly one document, so they get `ln(N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    doc_count: usize,
    max_n: usize,
    df: BTreeMap<Vec<String>, usize>,
}

impl IdfTable {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Highest n-gram order covered by this table.
    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// Raw document frequency, 0 for unseen n-grams.
    pub fn df<S: AsRef<str>>(&self, gram: &[S]) -> usize {
        let key: Vec<String> = gram.iter().map(|s| s.as_ref().to_owned()).collect();
        self.df.get(&key).copied().unwrap_or(0)
    }

    pub fn idf<S: AsRef<str>>(&self, gram: &[S]) -> f64 {
        let key: Vec<String> = gram.iter().map(|s| s.as_ref().to_owned()).collect();
        self.idf_key(&key)
    }

    pub(crate) fn idf_key(&self, gram: &[String]) -> f64 {
        let df = self.df.get(gram).copied().unwrap_or(0).max(1);
        (self.doc_count as f64 / df as f64).ln()
    }

    pub(crate) fn require(&self, n: usize) -> Result<(), MetricError> {
        if n > self.max_n {
            Err(MetricError::MissingIdf { need: n, have: self.max_n })
        } else {
            Ok(())
        }
    }
}

/// Builds document frequencies for all n-grams up to `max_n`. Each document
/// counts once per n-gram regardless of how often it occurs there.
pub fn compute_idf<S: AsRef<str>>(documents: &[Vec<S>], max_n: usize) -> Result<IdfTable, MetricError> {
    if max_n == 0 {
        return Err(MetricError::BadN(max_n));
    }
    if documents.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut df = BTreeMap::new();
    for doc in documents {
        for n in 1..=max_n {
            for gram in ngrams(doc, n)?.into_keys() {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
    }
    Ok(IdfTable { doc_count: documents.len(), max_n, df })
}
