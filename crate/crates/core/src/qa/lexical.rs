use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use super::{colors, is_stopword, normalize_answer, split_sentences, AnswerSpan, QaError, ARTICLES};
use crate::metrics::IdfTable;

static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[^\s\p{P}]+").unwrap());

/// Lowercase particles allowed inside a personal name ("Leonardo da Vinci").
const NAME_PARTICLES: [&str; 16] =
    ["da", "de", "di", "del", "della", "der", "den", "van", "von", "la", "le", "du", "des", "dos", "das", "y"];

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

const NUMBER_WORDS: [&str; 31] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
    "thirty",
    "forty",
    "fifty",
    "sixty",
    "seventy",
    "eighty",
    "ninety",
    "hundred",
    "thousand",
    "million",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AnswerType {
    Person,
    Date,
    Count,
    Color,
    Other,
}

#[derive(Debug)]
struct Word<'a> {
    text: &'a str,
    lower: String,
    /// byte range relative to the sentence
    start: usize,
    end: usize,
}

fn words(text: &str) -> Vec<Word<'_>> {
    WORD.find_iter(text)
        .map(|m| Word { text: m.as_str(), lower: m.as_str().to_lowercase(), start: m.start(), end: m.end() })
        .collect()
}

fn classify(question: &str) -> AnswerType {
    let q: Vec<String> = words(question).into_iter().map(|w| w.lower).collect();
    let has_pair = |a: &str, b: &[&str]| q.windows(2).any(|w| w[0] == a && b.contains(&w[1].as_str()));
    match q.first().map(String::as_str) {
        Some("who" | "whom" | "whose") => AnswerType::Person,
        Some("when") => AnswerType::Date,
        _ if has_pair("what", &["year"]) || has_pair("which", &["year"]) => AnswerType::Date,
        _ if has_pair("how", &["many"]) => AnswerType::Count,
        _ if has_pair("what", &["color", "colors", "colour", "colours"])
            || has_pair("which", &["color", "colors", "colour", "colours"]) =>
        {
            AnswerType::Color
        }
        _ => AnswerType::Other,
    }
}

/// Picks an answer span from `context` using word overlap with `question`.
///
/// 1. Every sentence is scored by the summed IDF of the distinct
///    non-stopword question words it contains (normalized forms). The
///    highest score wins; equal scores fall back to the number of shared
///    words, then to the earliest sentence.
/// 2. Inside the winning sentence the question's form selects the span:
///    *who* takes the longest run of capitalized words absent from the
///    question, *when* / *what year* the first 3-4 digit number or month
///    phrase, *how many* the first cardinal, *what color* the first run of
///    color words. Any other question takes the sentence with question
///    words and stopwords trimmed off both ends.
/// 3. When the typed rule finds nothing, the whole sentence is returned.
pub fn extract_answer_lexical(context: &str, question: &str, idf: &IdfTable) -> Result<AnswerSpan, QaError> {
    let sentences = split_sentences(context);
    if sentences.is_empty() {
        return Err(QaError::EmptyContext);
    }

    let question_words: BTreeSet<String> = normalize_answer(question).into_iter().collect();
    let content: BTreeSet<&str> = question_words.iter().map(String::as_str).filter(|w| !is_stopword(w)).collect();

    let mut best = (0usize, 0.0f64, 0usize);
    for (idx, sentence) in sentences.iter().enumerate() {
        let tokens: BTreeSet<String> = normalize_answer(sentence.text).into_iter().collect();
        let shared: Vec<&str> = content.iter().copied().filter(|w| tokens.contains(*w)).collect();
        let score: f64 = shared.iter().map(|w| idf.idf(&[*w])).sum();
        let (_, best_score, best_shared) = best;
        if score > best_score || (score == best_score && shared.len() > best_shared) {
            best = (idx, score, shared.len());
        }
    }
    let (index, score, _) = best;
    let sentence = sentences[index];

    let ws = words(sentence.text);
    let typed = match classify(question) {
        AnswerType::Person => person_span(&ws, &question_words),
        AnswerType::Date => date_span(&ws),
        AnswerType::Count => count_span(&ws),
        AnswerType::Color => color_span(&ws),
        AnswerType::Other => trimmed_span(&ws, &question_words),
    };
    let (rel_start, rel_end) = typed.unwrap_or((0, sentence.text.len()));
    Ok(AnswerSpan::from_bytes(context, sentence.start + rel_start, sentence.start + rel_end, score, index))
}

fn is_filler(word: &Word<'_>, question: &BTreeSet<String>) -> bool {
    question.contains(&word.lower) || is_stopword(&word.lower) || ARTICLES.contains(&word.lower.as_str())
}

fn person_span(ws: &[Word<'_>], question: &BTreeSet<String>) -> Option<(usize, usize)> {
    let is_name = |w: &Word<'_>| w.text.chars().next().is_some_and(char::is_uppercase) && !is_filler(w, question);
    let mut best: Option<(usize, usize)> = None; // (first word, last word)
    let mut i = 0;
    while i < ws.len() {
        if !is_name(&ws[i]) {
            i += 1;
            continue;
        }
        let first = i;
        let mut last = i;
        let mut j = i + 1;
        while j < ws.len() {
            if is_name(&ws[j]) {
                last = j;
                j += 1;
                continue;
            }
            // particles only count when a name word follows them
            let mut k = j;
            while k < ws.len() && NAME_PARTICLES.contains(&ws[k].text) {
                k += 1;
            }
            if k > j && k < ws.len() && is_name(&ws[k]) {
                last = k;
                j = k + 1;
            } else {
                break;
            }
        }
        if best.is_none_or(|(f, l)| last - first > l - f) {
            best = Some((first, last));
        }
        i = last + 1;
    }
    best.map(|(f, l)| (ws[f].start, ws[l].end))
}

fn is_year(w: &Word<'_>) -> bool {
    (3..=4).contains(&w.text.len()) && w.text.bytes().all(|b| b.is_ascii_digit())
}

fn is_day(w: &Word<'_>) -> bool {
    (1..=2).contains(&w.text.len()) && w.text.bytes().all(|b| b.is_ascii_digit())
}

fn date_span(ws: &[Word<'_>]) -> Option<(usize, usize)> {
    for (i, w) in ws.iter().enumerate() {
        if is_year(w) {
            return Some((w.start, w.end));
        }
        if MONTHS.contains(&w.lower.as_str()) {
            let first = if i > 0 && is_day(&ws[i - 1]) { i - 1 } else { i };
            let mut last = i;
            if ws.get(last + 1).is_some_and(is_day) {
                last += 1;
            }
            if ws.get(last + 1).is_some_and(is_year) {
                last += 1;
            }
            return Some((ws[first].start, ws[last].end));
        }
    }
    None
}

fn count_span(ws: &[Word<'_>]) -> Option<(usize, usize)> {
    ws.iter()
        .find(|w| w.text.bytes().all(|b| b.is_ascii_digit()) || NUMBER_WORDS.contains(&w.lower.as_str()))
        .map(|w| (w.start, w.end))
}

fn color_span(ws: &[Word<'_>]) -> Option<(usize, usize)> {
    let is_color = |w: &Word<'_>| colors().contains(w.lower.as_str());
    let first = ws.iter().position(is_color)?;
    let mut last = first;
    let mut j = first + 1;
    while j < ws.len() {
        if is_color(&ws[j]) {
            last = j;
            j += 1;
        } else if matches!(ws[j].lower.as_str(), "and" | "or") && ws.get(j + 1).is_some_and(is_color) {
            last = j + 1;
            j += 2;
        } else {
            break;
        }
    }
    Some((ws[first].start, ws[last].end))
}

fn trimmed_span(ws: &[Word<'_>], question: &BTreeSet<String>) -> Option<(usize, usize)> {
    let first = ws.iter().position(|w| !is_filler(w, question))?;
    let last = ws.iter().rposition(|w| !is_filler(w, question))?;
    Some((ws[first].start, ws[last].end))
}
