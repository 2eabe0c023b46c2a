/// Abbreviations whose trailing period never ends a sentence.
const ABBREVIATIONS: [&str; 7] = ["st.", "mr.", "mrs.", "dr.", "c.", "ca.", "no."];

/// One sentence of a context, borrowed with its byte offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sentence<'a> {
    pub text: &'a str,
    /// Byte offset of `text` within the context.
    pub start: usize,
}

impl Sentence<'_> {
    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }
}

/// Splits `context` after `.`, `!` or `?` when followed by whitespace or the
/// end of input. Whitespace between sentences belongs to no sentence, so the
/// pieces plus the gaps between them reconstruct the input.
pub fn split_sentences(context: &str) -> Vec<Sentence<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut chars = context.char_indices().peekable();

    while let Some((i, c)) = chars.next() {
        let s = match start {
            Some(s) => s,
            None if c.is_whitespace() => continue,
            None => {
                start = Some(i);
                i
            }
        };
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let boundary = chars.peek().is_none_or(|&(_, n)| n.is_whitespace());
        if !boundary {
            continue;
        }
        let end = i + c.len_utf8();
        if c == '.' && is_abbreviation(&context[s..end]) {
            continue;
        }
        out.push(Sentence { text: &context[s..end], start: s });
        start = None;
    }

    if let Some(s) = start {
        let text = context[s..].trim_end();
        out.push(Sentence { text, start: s });
    }
    out
}

fn is_abbreviation(sentence_so_far: &str) -> bool {
    let last_word = sentence_so_far
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or_default()
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&last_word.as_str())
}
