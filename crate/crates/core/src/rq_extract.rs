//! Rhetorical question extraction and the four training context views.
//!
//! A question counts as rhetorical when it sits inside a turn and the same
//! speaker follows it straight away with a statement (the self-answer).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::RqSegments;
use crate::error::{Error, Result};
use crate::text::{segment_sentences, SegmentedText, Sentence};

/// Longest self-answer run kept; later statements go to `post`.
pub const MAX_SELF_ANSWER_SENTENCES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RqInstance {
    pub pre: Vec<Sentence>,
    pub question: Sentence,
    pub self_answer: Vec<Sentence>,
    pub post: Vec<Sentence>,
    pub source_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContextMode {
    #[serde(rename = "rq")]
    Rq,
    #[serde(rename = "pre-rq")]
    PreRq,
    #[serde(rename = "rq-post")]
    RqPost,
    #[serde(rename = "full")]
    Full,
}

impl ContextMode {
    pub const ALL: [ContextMode; 4] = [
        ContextMode::Rq,
        ContextMode::PreRq,
        ContextMode::RqPost,
        ContextMode::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextMode::Rq => "rq",
            ContextMode::PreRq => "pre-rq",
            ContextMode::RqPost => "rq-post",
            ContextMode::Full => "full",
        }
    }

    /// Label used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ContextMode::Rq => "RQ",
            ContextMode::PreRq => "Pre+RQ",
            ContextMode::RqPost => "RQ+Post",
            ContextMode::Full => "Full",
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ContextMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown context mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    pub min_words: usize,
    pub max_words: usize,
    pub apply_length_filter: bool,
}

impl ExtractOptions {
    pub fn forums() -> Self {
        ExtractOptions {
            min_words: 10,
            max_words: 150,
            apply_length_filter: true,
        }
    }

    pub fn twitter() -> Self {
        ExtractOptions {
            apply_length_filter: false,
            ..Self::forums()
        }
    }
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self::forums()
    }
}

/// Finds every question immediately followed by a statement of the same
/// turn. Instances come out in question order.
pub fn extract_rqs(
    segmented: &SegmentedText,
    source_id: &str,
    opts: ExtractOptions,
) -> Vec<RqInstance> {
    if opts.apply_length_filter {
        let words = segmented.lexical_word_count();
        if words < opts.min_words || words > opts.max_words {
            return Vec::new();
        }
    }
    let s = &segmented.sentences;
    let mut out = Vec::new();
    for i in 0..s.len() {
        if !s[i].is_question || i + 1 >= s.len() || s[i + 1].is_question {
            continue;
        }
        let run = s[i + 1..]
            .iter()
            .take_while(|x| !x.is_question)
            .take(MAX_SELF_ANSWER_SENTENCES)
            .count();
        let answer_end = i + 1 + run;
        out.push(RqInstance {
            pre: s[..i].to_vec(),
            question: s[i].clone(),
            self_answer: s[i + 1..answer_end].to_vec(),
            post: s[answer_end..].to_vec(),
            source_id: source_id.to_owned(),
        });
    }
    out
}

fn tokens_of<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Vec<String> {
    sentences
        .into_iter()
        .flat_map(|s| s.tokens.iter().cloned())
        .collect()
}

fn join_raw(sentences: &[Sentence]) -> String {
    sentences
        .iter()
        .map(|s| s.raw.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

impl RqInstance {
    /// Sentences covered by `mode`, in text order.
    pub fn view_sentences(&self, mode: ContextMode) -> Vec<&Sentence> {
        let rq = std::iter::once(&self.question).chain(&self.self_answer);
        match mode {
            ContextMode::Rq => rq.collect(),
            ContextMode::PreRq => self.pre.iter().chain(rq).collect(),
            ContextMode::RqPost => rq.chain(&self.post).collect(),
            ContextMode::Full => self.pre.iter().chain(rq).chain(&self.post).collect(),
        }
    }

    pub fn segments(&self) -> RqSegments {
        RqSegments {
            pre: join_raw(&self.pre),
            question: self.question.raw.clone(),
            self_answer: join_raw(&self.self_answer),
            post: join_raw(&self.post),
        }
    }

    /// Rebuilds an instance from stored segment strings.
    pub fn from_segments(source_id: &str, seg: &RqSegments) -> Result<Self> {
        let question = segment_sentences(&seg.question).sentences;
        let [question] = <[Sentence; 1]>::try_from(question).map_err(|v| {
            Error::Format(format!(
                "record `{source_id}`: question segment holds {} sentences",
                v.len()
            ))
        })?;
        let self_answer = segment_sentences(&seg.self_answer).sentences;
        if self_answer.is_empty() {
            return Err(Error::Format(format!(
                "record `{source_id}`: empty self_answer"
            )));
        }
        Ok(RqInstance {
            pre: segment_sentences(&seg.pre).sentences,
            question,
            self_answer,
            post: segment_sentences(&seg.post).sentences,
            source_id: source_id.to_owned(),
        })
    }
}

/// Tokens of the requested context window, in text order.
pub fn context_view(instance: &RqInstance, mode: ContextMode) -> Vec<String> {
    tokens_of(instance.view_sentences(mode))
}
