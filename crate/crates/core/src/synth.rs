//! Synthetic corpus, dictionary and embeddings with one planted category.
//!
//! Every generated turn has the shape `pre. question? answer. [post?]`, so
//! extraction recovers exactly one instance per record. Positive instances
//! carry one word from the planted category somewhere in the question or
//! answer; negative instances carry a neutral word in the same slot. Both
//! words are missing from the embedding table, and all other words are drawn
//! from the same distribution for both classes, so the planted category is
//! the only signal.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Class, Dataset, Domain, LabelSource, Record};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::lexicon::{domain_categories, parse_lexicon, Lexicon};
use crate::rq_extract::{extract_rqs, ExtractOptions};
use crate::text::segment_sentences;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub domain: Domain,
    /// Number of records, split evenly between the two classes.
    pub size: usize,
    pub embedding_dim: usize,
    /// Lexical category whose words mark the positive class.
    pub planted: String,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            domain: Domain::Twitter,
            size: 400,
            embedding_dim: 25,
            planted: "Certainty".into(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    /// Records labeled sarcastic / other, with extracted segments attached.
    pub dataset: Dataset,
    /// Dictionary file contents for [`SynthCorpus::lexicon`].
    pub lexicon_text: String,
    pub lexicon: Lexicon,
    pub embeddings: EmbeddingTable,
}

const WORDS_PER_CATEGORY: usize = 6;
const FILLER_WORDS: usize = 150;

fn stem(category: &str) -> String {
    category.to_lowercase()
}

pub fn generate(opts: &SynthOptions) -> Result<SynthCorpus> {
    if opts.size < 4 || opts.size % 2 != 0 {
        return Err(Error::InvalidArgument(
            "synthetic size must be even and at least 4".into(),
        ));
    }
    if opts.embedding_dim == 0 {
        return Err(Error::InvalidArgument(
            "embedding dimension must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let probe = Lexicon::new(Vec::<(String, Vec<String>)>::new())?;
    let lexical: Vec<String> = domain_categories(opts.domain)
        .into_iter()
        .filter(|c| !probe.knows(c))
        .collect();
    if !lexical.contains(&opts.planted) {
        return Err(Error::UnknownCategory(opts.planted.clone()));
    }

    let mut lexicon_text = String::from("# synthetic dictionary\n");
    for cat in &lexical {
        let words: Vec<String> = (0..WORDS_PER_CATEGORY)
            .map(|j| format!("{}{j}", stem(cat)))
            .collect();
        lexicon_text.push_str(&format!("{cat}: {}\n", words.join(", ")));
    }
    let lexicon = parse_lexicon(lexicon_text.as_bytes())?;

    let mut common: Vec<String> = (0..FILLER_WORDS).map(|j| format!("filler{j}")).collect();
    for cat in lexical.iter().filter(|c| **c != opts.planted) {
        common.extend((0..WORDS_PER_CATEGORY).map(|j| format!("{}{j}", stem(cat))));
    }

    let mut embeddings = EmbeddingTable::new(opts.embedding_dim)?;
    for w in &common {
        let v: Vec<f32> = (0..opts.embedding_dim)
            .map(|_| rng.gen_range(-1.0f32..1.0))
            .collect();
        embeddings.insert(w, &v)?;
    }

    let planted_stem = stem(&opts.planted);
    let mut labels: Vec<Class> = (0..opts.size)
        .map(|i| {
            if i % 2 == 0 {
                Class::Sarcastic
            } else {
                Class::Other
            }
        })
        .collect();
    labels.shuffle(&mut rng);

    let mut records = Vec::with_capacity(opts.size);
    for (i, class) in labels.into_iter().enumerate() {
        let marker = if class == Class::Sarcastic {
            format!("{planted_stem}{}", rng.gen_range(0..WORDS_PER_CATEGORY))
        } else {
            format!("neutral{}", rng.gen_range(0..WORDS_PER_CATEGORY))
        };
        let sentence =
            |len: std::ops::RangeInclusive<usize>, rng: &mut ChaCha8Rng| -> Vec<String> {
                let n = rng.gen_range(len);
                (0..n)
                    .map(|_| common.choose(rng).expect("vocabulary").clone())
                    .collect()
            };
        let pre: Vec<Vec<String>> = (0..rng.gen_range(1..=2))
            .map(|_| sentence(3..=7, &mut rng))
            .collect();
        let mut question = sentence(3..=7, &mut rng);
        let mut answer: Vec<Vec<String>> = (0..rng.gen_range(1..=2))
            .map(|_| sentence(3..=6, &mut rng))
            .collect();
        let post = rng.gen_bool(0.5).then(|| sentence(3..=6, &mut rng));

        if rng.gen_bool(0.5) {
            let at = rng.gen_range(0..=question.len());
            question.insert(at, marker);
        } else {
            let s = rng.gen_range(0..answer.len());
            let at = rng.gen_range(0..=answer[s].len());
            answer[s].insert(at, marker);
        }

        let mut text = String::new();
        for s in &pre {
            text.push_str(&format!("{}. ", s.join(" ")));
        }
        text.push_str(&format!("{}? ", question.join(" ")));
        let answer_text: Vec<String> = answer.iter().map(|s| format!("{}.", s.join(" "))).collect();
        text.push_str(&answer_text.join(" "));
        if let Some(p) = &post {
            text.push_str(&format!(" {}?", p.join(" ")));
        }

        let id = format!("synth-{i:04}");
        let mut found = extract_rqs(&segment_sentences(&text), &id, ExtractOptions::twitter());
        if found.len() != 1 {
            return Err(Error::Format(format!(
                "synthetic record `{id}` yields {} instances",
                found.len()
            )));
        }
        let instance = found.remove(0);
        records.push(Record {
            id,
            domain: opts.domain,
            text,
            label: LabelSource::Gold(class),
            segments: Some(instance.segments()),
        });
    }

    Ok(SynthCorpus {
        dataset: Dataset::from_records(records)?,
        lexicon_text,
        lexicon,
        embeddings,
    })
}
