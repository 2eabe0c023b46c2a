use std::sync::LazyLock;

use regex::Regex;

/// English articles dropped by [`normalize_answer`].
pub const ARTICLES: [&str; 3] = ["a", "an", "the"];

static PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{P}").unwrap());

/// Answer normalization: lowercase, punctuation replaced by spaces,
/// whitespace split, articles removed.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    PUNCT.replace_all(&lower, " ").split_whitespace().filter(|w| !ARTICLES.contains(w)).map(str::to_owned).collect()
}
