use std::collections::BTreeMap;

use super::{ngrams, sparse_cosine, tokenize, IdfTable, MetricError, CIDER_MAX_N};

type TfIdfVector = BTreeMap<Vec<String>, f64>;

fn tfidf_vector(tokens: &[String], n: usize, idf: &IdfTable) -> Result<TfIdfVector, MetricError> {
    Ok(ngrams(tokens, n)?
        .into_iter()
        .map(|(gram, tf)| {
            let w = tf as f64 * idf.idf_key(&gram);
            (gram, w)
        })
        .collect())
}

/// Plain CIDEr: for each order n in 1..=4, the mean cosine similarity between
/// the candidate's TF-IDF n-gram vector and each reference's, then averaged
/// over the four orders.
///
/// No x10 scaling and no length penalty, so the score lies in `[0, 1]`.
pub fn cider<S: AsRef<str>>(candidate: &str, references: &[S], idf: &IdfTable) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }
    idf.require(CIDER_MAX_N)?;
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r.as_ref())).collect();

    let mut total = 0.0;
    for n in 1..=CIDER_MAX_N {
        let cand_vec = tfidf_vector(&cand, n, idf)?;
        let mut per_order = 0.0;
        for r in &refs {
            per_order += sparse_cosine(&cand_vec, &tfidf_vector(r, n, idf)?);
        }
        total += per_order / refs.len() as f64;
    }
    Ok(total / CIDER_MAX_N as f64)
}
