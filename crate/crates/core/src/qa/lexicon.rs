use std::collections::BTreeSet;
use std::sync::LazyLock;

static STOPWORDS: LazyLock<BTreeSet<&'static str>> =
    LazyLock::new(|| parse_list(include_str!("../../../../data/stopwords.txt")));

static COLORS: LazyLock<BTreeSet<&'static str>> =
    LazyLock::new(|| parse_list(include_str!("../../../../data/colors.txt")));

fn parse_list(raw: &'static str) -> BTreeSet<&'static str> {
    raw.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect()
}

/// The shipped English stopword list (`data/stopwords.txt`).
pub fn stopwords() -> &'static BTreeSet<&'static str> {
    &STOPWORDS
}

/// The shipped color lexicon (`data/colors.txt`).
pub fn colors() -> &'static BTreeSet<&'static str> {
    &COLORS
}

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(word)
}
