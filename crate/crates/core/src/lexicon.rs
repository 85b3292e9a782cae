//! Word-category dictionaries and per-document category scores.
//!
//! A dictionary file has one category per line:
//!
//! ```text
//! # comment
//! 2ndPerson: you, your, you're
//! Informal: gotta, luv*, em, ya
//! ```
//!
//! An entry ending in `*` matches any token starting with the stem. The
//! punctuation categories and the two structural categories (`WordCount`,
//! `WordsPerSentence`) are built in and may not be redefined.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use crate::corpus::Domain;
use crate::error::{Error, Result};
use crate::text::is_word;

pub const WORD_COUNT: &str = "WordCount";
pub const WORDS_PER_SENTENCE: &str = "WordsPerSentence";

const PUNCTUATION_CATEGORIES: &[(&str, &[&str])] = &[
    ("Comma", &[","]),
    ("Colon", &[":"]),
    ("Semicolon", &[";"]),
    ("Parenthesis", &["(", ")"]),
    ("QuoteMarks", &["\"", "\u{201c}", "\u{201d}"]),
    ("ExclamationMarks", &["!"]),
];

const FORUMS_CATEGORIES: [&str; 20] = [
    "2ndPerson",
    "3rdPersonPlural",
    "3rdPersonSingular",
    "Adverbs",
    "Affiliation",
    "Assent",
    "AuxiliaryVerbs",
    "Compare",
    "ExclamationMarks",
    "FocusFuture",
    "Friends",
    "Function",
    "Health",
    "Informal",
    "Interrogatives",
    "Netspeak",
    "Numerals",
    "Quantifiers",
    "Rewards",
    "Sadness",
];

const TWITTER_CATEGORIES: [&str; 20] = [
    "2ndPerson",
    "3rdPersonPlural",
    "Articles",
    "AuxiliaryVerbs",
    "Certainty",
    "Colon",
    "Comma",
    "Conjunction",
    "Friends",
    "Male",
    "Negations",
    "NegativeEmotion",
    "Parenthesis",
    "QuoteMarks",
    "Risk",
    "Sadness",
    "Semicolon",
    "SwearWords",
    "WordCount",
    "WordsPerSentence",
];

/// The 20 categories used as features for `domain`, in a fixed order.
pub fn domain_categories(domain: Domain) -> Vec<String> {
    let names: &[&str] = match domain {
        Domain::Forums => &FORUMS_CATEGORIES,
        Domain::Twitter => &TWITTER_CATEGORIES,
    };
    names.iter().map(|s| (*s).to_owned()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entry {
    Literal(String),
    Prefix(String),
}

impl Entry {
    pub fn parse(raw: &str) -> Option<Entry> {
        let raw = raw.trim().to_lowercase();
        match raw.strip_suffix('*') {
            Some("") => None,
            Some(stem) => Some(Entry::Prefix(stem.to_owned())),
            None if raw.is_empty() => None,
            None => Some(Entry::Literal(raw)),
        }
    }

    pub fn matches(&self, token: &str) -> bool {
        match self {
            Entry::Literal(w) => w == token,
            Entry::Prefix(stem) => token.starts_with(stem.as_str()),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Category {
    literals: std::collections::HashSet<String>,
    prefixes: Vec<String>,
}

impl Category {
    fn matches(&self, token: &str) -> bool {
        self.literals.contains(token) || self.prefixes.iter().any(|p| token.starts_with(p.as_str()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    names: Vec<String>,
    categories: HashMap<String, Category>,
}

fn is_builtin(name: &str) -> bool {
    name == WORD_COUNT
        || name == WORDS_PER_SENTENCE
        || PUNCTUATION_CATEGORIES.iter().any(|(n, _)| *n == name)
}

impl Lexicon {
    /// Builds a lexicon from `(category, entries)` pairs.
    pub fn new<I, S, E>(categories: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<E>)>,
        S: Into<String>,
        E: AsRef<str>,
    {
        let mut lex = Lexicon::default();
        for (name, entries) in categories {
            let name = name.into();
            let parsed = entries
                .iter()
                .map(|e| {
                    Entry::parse(e.as_ref()).ok_or_else(|| {
                        Error::Format(format!("category `{name}`: empty entry `{}`", e.as_ref()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            lex.insert(name, parsed)?;
        }
        Ok(lex)
    }

    fn insert(&mut self, name: String, entries: Vec<Entry>) -> Result<()> {
        if is_builtin(&name) || self.categories.contains_key(&name) {
            return Err(Error::DuplicateCategory(name));
        }
        if entries.is_empty() {
            return Err(Error::EmptyCategory(name));
        }
        let mut cat = Category::default();
        for e in entries {
            match e {
                Entry::Literal(w) => {
                    cat.literals.insert(w);
                }
                Entry::Prefix(p) => cat.prefixes.push(p),
            }
        }
        self.names.push(name.clone());
        self.categories.insert(name, cat);
        Ok(())
    }

    /// Categories defined by the dictionary, in file order.
    pub fn category_names(&self) -> &[String] {
        &self.names
    }

    /// Whether `name` can be scored, either from the dictionary or built in.
    pub fn knows(&self, name: &str) -> bool {
        is_builtin(name) || self.categories.contains_key(name)
    }

    /// Number of literal plus prefix entries of a dictionary category.
    pub fn entry_count(&self, name: &str) -> Option<usize> {
        self.categories
            .get(name)
            .map(|c| c.literals.len() + c.prefixes.len())
    }

    pub fn without(&self, name: &str) -> Lexicon {
        let mut lex = self.clone();
        lex.names.retain(|n| n != name);
        lex.categories.remove(name);
        lex
    }
}

pub fn parse_lexicon<R: BufRead>(reader: R) -> Result<Lexicon> {
    let mut lex = Lexicon::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(i + 1, "expected `Category: entry, entry`"))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::parse(i + 1, "empty category name"));
        }
        let mut entries = Vec::new();
        for raw in rest.split(',').filter(|r| !r.trim().is_empty()) {
            let entry = Entry::parse(raw).ok_or_else(|| {
                Error::parse(i + 1, format!("prefix entry `{}` has no stem", raw.trim()))
            })?;
            entries.push(entry);
        }
        lex.insert(name.to_owned(), entries)?;
    }
    Ok(lex)
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(BufReader::new(file))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryScores {
    pub scores: Vec<(String, f64)>,
    pub word_count: usize,
    pub words_per_sentence: f64,
}

impl CategoryScores {
    pub fn values(&self) -> Vec<f64> {
        self.scores.iter().map(|(_, v)| *v).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.scores.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Scores `tokens` against the `selected` categories.
///
/// Dictionary and punctuation categories yield `matches / words`, where
/// `words` counts non-punctuation tokens and a token counts at most once per
/// category. `WordCount` is the raw word count and `WordsPerSentence` is
/// `words / sentences`. A document without words scores zero everywhere.
pub fn score<S: AsRef<str>>(
    tokens: &[S],
    sentences: usize,
    lexicon: &Lexicon,
    selected: &[String],
) -> Result<CategoryScores> {
    let words = tokens.iter().filter(|t| is_word(t.as_ref())).count();
    let words_per_sentence = if sentences == 0 {
        0.0
    } else {
        words as f64 / sentences as f64
    };

    let mut scores = Vec::with_capacity(selected.len());
    for name in selected {
        let value = if name == WORD_COUNT {
            words as f64
        } else if name == WORDS_PER_SENTENCE {
            words_per_sentence
        } else {
            let matches =
                if let Some((_, marks)) = PUNCTUATION_CATEGORIES.iter().find(|(n, _)| n == name) {
                    tokens
                        .iter()
                        .filter(|t| marks.contains(&t.as_ref()))
                        .count()
                } else {
                    let cat = lexicon
                        .categories
                        .get(name)
                        .ok_or_else(|| Error::UnknownCategory(name.clone()))?;
                    tokens.iter().filter(|t| cat.matches(t.as_ref())).count()
                };
            if words == 0 {
                0.0
            } else {
                matches as f64 / words as f64
            }
        };
        scores.push((name.clone(), value));
    }
    Ok(CategoryScores {
        scores,
        word_count: words,
        words_per_sentence,
    })
}
