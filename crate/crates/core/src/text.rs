//! Tokenization, sentence segmentation and word counting.
//!
//! Tokens are lowercased. The punctuation marks `. , ! ? : ; " ( )` (plus
//! curly double quotes) become tokens of their own, except inside hashtags,
//! `@handles`, URLs and emoticons, which stay whole.
//!
//! Sentence splitting is deliberately naive: a run of `.`, `!` or `?`
//! followed by whitespace or the end of the text closes a sentence. There is
//! no abbreviation handling, so "U.S. troops" splits after "U.S.".

use serde::{Deserialize, Serialize};

const PUNCTUATION: &[char] = &[
    '.', ',', '!', '?', ':', ';', '"', '(', ')', '\u{201c}', '\u{201d}',
];

const EMOTICONS: &[&str] = &[
    ":)", ":-)", ":(", ":-(", ";)", ";-)", ":d", ":-d", ":p", ":-p", ";p", ":/", ":-/", ":'(",
    ":o", ":-o", ":|", ":*", "8)", "8-)", "b-)", "(:", "):", "xd", "<3", "^_^", "-_-", "o_o",
];

/// One sentence of a segmented text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub raw: String,
    pub is_question: bool,
    /// Byte offsets `(start, end)` into the segmented source.
    pub char_span: (usize, usize),
}

impl Sentence {
    /// Number of non-punctuation tokens.
    pub fn word_count(&self) -> usize {
        word_count(&self.tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentedText {
    pub sentences: Vec<Sentence>,
    /// Total token count over all sentences, punctuation included.
    pub word_count: usize,
}

impl SegmentedText {
    /// Number of non-punctuation tokens over all sentences. This is the
    /// count used for lexicon normalization and the post length filter.
    pub fn lexical_word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::word_count).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(String::as_str))
    }
}

fn is_punct_char(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

pub fn is_emoticon(token: &str) -> bool {
    EMOTICONS.contains(&token)
}

/// A token is a word when it is not an emoticon and carries at least one
/// alphanumeric character.
pub fn is_word(token: &str) -> bool {
    !is_emoticon(token) && token.chars().any(char::is_alphanumeric)
}

pub fn word_count<S: AsRef<str>>(tokens: &[S]) -> usize {
    tokens.iter().filter(|t| is_word(t.as_ref())).count()
}

fn is_url(chunk: &str) -> bool {
    chunk.starts_with("http://") || chunk.starts_with("https://") || chunk.starts_with("www.")
}

fn normalize(chunk: &str) -> String {
    chunk.to_lowercase().replace('\u{2019}', "'")
}

/// Splits off a run of trailing punctuation, returning `(head, tail)`.
fn split_trailing_punct(chunk: &str) -> (&str, &str) {
    let head = chunk.trim_end_matches(is_punct_char);
    (head, &chunk[head.len()..])
}

fn push_punct_run(out: &mut Vec<String>, run: &str) {
    out.extend(run.chars().map(String::from));
}

fn tokenize_chunk(chunk: &str, out: &mut Vec<String>) {
    if is_emoticon(chunk) {
        out.push(chunk.to_owned());
        return;
    }
    if is_url(chunk) {
        let (head, tail) = split_trailing_punct(chunk);
        out.push(head.to_owned());
        push_punct_run(out, tail);
        return;
    }

    // Tags may start the chunk or follow punctuation.
    let mut rest = chunk;
    while let Some(c) = rest.chars().next() {
        if c == '#' || c == '@' {
            let end = rest[1..]
                .char_indices()
                .find(|&(_, c)| !(c.is_alphanumeric() || matches!(c, '_' | '.' | '-' | '\'')))
                .map_or(rest.len(), |(i, _)| i + 1);
            let tag = rest[..end].trim_end_matches('.');
            if tag.len() > 1 {
                out.push(tag.to_owned());
                rest = &rest[tag.len()..];
                continue;
            }
        }
        if is_punct_char(c) {
            out.push(c.to_string());
            rest = &rest[c.len_utf8()..];
            continue;
        }
        let end = rest.find(is_punct_char).unwrap_or(rest.len());
        out.push(rest[..end].to_owned());
        rest = &rest[end..];
    }
}

/// Lowercases and splits `text` into tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        tokenize_chunk(&normalize(chunk), &mut out);
    }
    out
}

fn make_sentence(text: &str, start: usize, end: usize, is_question: bool) -> Sentence {
    let raw = &text[start..end];
    Sentence {
        tokens: tokenize(raw),
        raw: raw.to_owned(),
        is_question,
        char_span: (start, end),
    }
}

/// Splits `text` into sentences at runs of terminal punctuation.
pub fn segment_sentences(text: &str) -> SegmentedText {
    let mut sentences = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut start: Option<usize> = None;

    while let Some((i, c)) = chars.next() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut question = c == '?';
        let mut end = i + c.len_utf8();
        while let Some(&(j, d)) = chars.peek() {
            if !matches!(d, '.' | '!' | '?') {
                break;
            }
            question |= d == '?';
            end = j + d.len_utf8();
            chars.next();
        }
        let at_boundary = chars.peek().map_or(true, |&(_, d)| d.is_whitespace());
        if at_boundary {
            let s = start.take().unwrap_or(i);
            sentences.push(make_sentence(text, s, end, question));
        }
    }
    if let Some(s) = start {
        let end = s + text[s..].trim_end().len();
        sentences.push(make_sentence(text, s, end, false));
    }

    let word_count = sentences.iter().map(|s| s.tokens.len()).sum();
    SegmentedText {
        sentences,
        word_count,
    }
}
