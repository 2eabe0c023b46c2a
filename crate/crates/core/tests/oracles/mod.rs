//! Slow, plainly written reference implementations of the caption metrics.
//! Nothing here shares code with the library: vectors are materialized in
//! full, LCS is found by enumerating subsequences, document frequencies are
//! recounted on every lookup.

#![allow(dead_code)]

pub const BETA: f64 = 1.2;

pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn grams(toks: &[String], n: usize) -> Vec<Vec<String>> {
    if toks.len() < n {
        return Vec::new();
    }
    (0..=toks.len() - n).map(|i| toks[i..i + n].to_vec()).collect()
}

fn count<T: PartialEq>(items: &[T], x: &T) -> usize {
    items.iter().filter(|y| *y == x).count()
}

fn distinct<T: PartialEq + Clone>(items: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in items {
        if !out.contains(x) {
            out.push(x.clone());
        }
    }
    out
}

/// Document collection for IDF lookups.
pub struct Docs {
    pub docs: Vec<Vec<String>>,
}

impl Docs {
    pub fn new(texts: &[String]) -> Self {
        Docs { docs: texts.iter().map(|t| tokens(t)).collect() }
    }

    pub fn idf(&self, gram: &[String]) -> f64 {
        let n = gram.len();
        let df = self.docs.iter().filter(|d| grams(d, n).iter().any(|g| g == gram)).count();
        (self.docs.len() as f64 / df.max(1) as f64).ln()
    }
}

pub fn bleu1(candidate: &str, references: &[String]) -> f64 {
    let cand = tokens(candidate);
    if cand.is_empty() {
        return 0.0;
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokens(r)).collect();
    let mut clipped = 0usize;
    for w in distinct(&cand) {
        let max_ref = refs.iter().map(|r| count(r, &w)).max().unwrap_or(0);
        clipped += count(&cand, &w).min(max_ref);
    }
    let p1 = clipped as f64 / cand.len() as f64;

    let c = cand.len() as i64;
    let mut r = refs[0].len() as i64;
    for rf in &refs {
        let len = rf.len() as i64;
        if (len - c).abs() < (r - c).abs() || ((len - c).abs() == (r - c).abs() && len < r) {
            r = len;
        }
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * p1
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == *n))
}

/// LCS by trying every subsequence of `a` (2^len(a) of them).
pub fn lcs_brute(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 20, "brute-force LCS only for short inputs");
    let mut best = 0;
    for mask in 0u32..(1u32 << a.len()) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let pick: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if is_subsequence(&pick, b) {
            best = size;
        }
    }
    best
}

pub fn rouge_l(candidate: &str, references: &[String]) -> f64 {
    let cand = tokens(candidate);
    let mut best: f64 = 0.0;
    for r in references {
        let rf = tokens(r);
        if cand.is_empty() || rf.is_empty() {
            continue;
        }
        let l = lcs_brute(&cand, &rf) as f64;
        let p = l / cand.len() as f64;
        let rec = l / rf.len() as f64;
        let denom = rec + BETA * BETA * p;
        let f = if denom == 0.0 { 0.0 } else { (1.0 + BETA * BETA) * p * rec / denom };
        best = best.max(f);
    }
    best
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Dense tf-idf vectors of `a` and `b` over the union of their n-grams.
fn dense(a: &[String], b: &[String], n: usize, docs: &Docs) -> (Vec<f64>, Vec<f64>) {
    let ga = grams(a, n);
    let gb = grams(b, n);
    let mut all = ga.clone();
    all.extend(gb.iter().cloned());
    let axes = distinct(&all);
    let va = axes.iter().map(|g| count(&ga, g) as f64 * docs.idf(g)).collect();
    let vb = axes.iter().map(|g| count(&gb, g) as f64 * docs.idf(g)).collect();
    (va, vb)
}

pub fn cider(candidate: &str, references: &[String], docs: &Docs) -> f64 {
    let cand = tokens(candidate);
    let mut total = 0.0;
    for n in 1..=4 {
        let mut per_ref = 0.0;
        for r in references {
            let (va, vb) = dense(&cand, &tokens(r), n, docs);
            per_ref += cosine(&va, &vb);
        }
        total += per_ref / references.len() as f64;
    }
    total / 4.0
}

pub fn tfidf_cosine(a: &str, b: &str, docs: &Docs) -> f64 {
    let (va, vb) = dense(&tokens(a), &tokens(b), 1, docs);
    cosine(&va, &vb)
}
