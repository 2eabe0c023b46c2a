use std::collections::BTreeMap;

use super::{sparse_cosine, tokenize, IdfTable, MetricError};

fn unigram_tfidf(text: &str, idf: &IdfTable) -> BTreeMap<String, f64> {
    let mut tf: BTreeMap<String, usize> = BTreeMap::new();
    for tok in tokenize(text) {
        *tf.entry(tok).or_insert(0) += 1;
    }
    tf.into_iter()
        .map(|(tok, count)| {
            let w = count as f64 * idf.idf_key(std::slice::from_ref(&tok));
            (tok, w)
        })
        .collect()
}

/// Cosine similarity between unigram TF-IDF vectors (raw term counts times
/// IDF). Zero when either vector is zero.
pub fn tfidf_cosine(candidate: &str, reference_doc: &str, idf: &IdfTable) -> Result<f64, MetricError> {
    idf.require(1)?;
    Ok(sparse_cosine(&unigram_tfidf(candidate, idf), &unigram_tfidf(reference_doc, idf)))
}
