//! Labeled dialog records: loading, vote aggregation, tweet cleaning,
//! class balancing and stratified splitting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Forums,
    Twitter,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Forums => "forums",
            Domain::Twitter => "twitter",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forums" => Ok(Domain::Forums),
            "twitter" => Ok(Domain::Twitter),
            other => Err(Error::InvalidArgument(format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashtagLabel {
    Sarcastic,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Sarcastic,
    Other,
    Rq,
    Factual,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Sarcastic => "sarcastic",
            Class::Other => "other",
            Class::Rq => "rq",
            Class::Factual => "factual",
        }
    }

    pub fn task(self) -> Task {
        match self {
            Class::Sarcastic | Class::Other => Task::SarcasmVsOther,
            Class::Rq | Class::Factual => Task::RqVsFactual,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sarcastic" => Ok(Class::Sarcastic),
            "other" => Ok(Class::Other),
            "rq" => Ok(Class::Rq),
            "factual" => Ok(Class::Factual),
            other => Err(Error::InvalidArgument(format!("unknown class `{other}`"))),
        }
    }
}

/// A binary classification task. The first class is the positive one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    SarcasmVsOther,
    RqVsFactual,
}

impl Task {
    pub fn classes(self) -> [Class; 2] {
        match self {
            Task::SarcasmVsOther => [Class::Sarcastic, Class::Other],
            Task::RqVsFactual => [Class::Rq, Class::Factual],
        }
    }

    pub fn positive(self) -> Class {
        self.classes()[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteOutcome {
    Sarcastic,
    Other,
    Ambiguous,
}

/// Where a record's label comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSource {
    Votes([u8; 5]),
    Hashtag(HashtagLabel),
    Gold(Class),
}

/// Text segments attached to a record once an RQ has been extracted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RqSegments {
    pub pre: String,
    pub question: String,
    pub self_answer: String,
    pub post: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub domain: Domain,
    pub text: String,
    pub label: LabelSource,
    pub segments: Option<RqSegments>,
}

impl Record {
    /// The resolved class, or `None` for ambiguous vote patterns.
    pub fn resolved_class(&self) -> Result<Option<Class>> {
        Ok(match &self.label {
            LabelSource::Votes(v) => match aggregate_votes(v)? {
                VoteOutcome::Sarcastic => Some(Class::Sarcastic),
                VoteOutcome::Other => Some(Class::Other),
                VoteOutcome::Ambiguous => None,
            },
            LabelSource::Hashtag(HashtagLabel::Sarcastic) => Some(Class::Sarcastic),
            LabelSource::Hashtag(HashtagLabel::None) => Some(Class::Other),
            LabelSource::Gold(c) => Some(*c),
        })
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(&RawRecord::from(self)).expect("record serializes")
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: Option<String>,
    domain: Option<Domain>,
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    votes: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hashtag_label: Option<HashtagLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pre: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    self_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    post: Option<String>,
}

impl From<&Record> for RawRecord {
    fn from(r: &Record) -> Self {
        let mut raw = RawRecord {
            id: Some(r.id.clone()),
            domain: Some(r.domain),
            text: Some(r.text.clone()),
            ..Default::default()
        };
        match &r.label {
            LabelSource::Votes(v) => raw.votes = Some(v.to_vec()),
            LabelSource::Hashtag(h) => raw.hashtag_label = Some(*h),
            LabelSource::Gold(c) => raw.gold = Some(c.as_str().to_owned()),
        }
        if let Some(s) = &r.segments {
            raw.pre = Some(s.pre.clone());
            raw.question = Some(s.question.clone());
            raw.self_answer = Some(s.self_answer.clone());
            raw.post = Some(s.post.clone());
        }
        raw
    }
}

fn record_from_raw(raw: RawRecord, line: usize) -> Result<Record> {
    let id = raw
        .id
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::parse(line, "missing `id`"))?;
    let domain = raw
        .domain
        .ok_or_else(|| Error::parse(line, "missing `domain`"))?;
    let text = raw
        .text
        .ok_or_else(|| Error::parse(line, "missing `text`"))?;

    let present =
        raw.votes.is_some() as u8 + raw.hashtag_label.is_some() as u8 + raw.gold.is_some() as u8;
    if present != 1 {
        return Err(Error::parse(
            line,
            "exactly one of `votes`, `hashtag_label`, `gold` is required",
        ));
    }
    let label = if let Some(v) = raw.votes {
        if v.len() != 5 {
            return Err(Error::parse(
                line,
                format!("expected 5 votes, got {}", v.len()),
            ));
        }
        if v.iter().any(|&x| x > 1) {
            return Err(Error::parse(line, "votes must be 0 or 1"));
        }
        if domain != Domain::Forums {
            return Err(Error::parse(
                line,
                "votes are only valid for forums records",
            ));
        }
        LabelSource::Votes([v[0], v[1], v[2], v[3], v[4]])
    } else if let Some(h) = raw.hashtag_label {
        if domain != Domain::Twitter {
            return Err(Error::parse(
                line,
                "hashtag_label is only valid for twitter records",
            ));
        }
        LabelSource::Hashtag(h)
    } else {
        let g = raw.gold.unwrap_or_default();
        LabelSource::Gold(
            g.parse()
                .map_err(|e: Error| Error::parse(line, e.to_string()))?,
        )
    };

    let segments = match (raw.pre, raw.question, raw.self_answer, raw.post) {
        (None, None, None, None) => None,
        (pre, Some(question), Some(self_answer), post) => Some(RqSegments {
            pre: pre.unwrap_or_default(),
            question,
            self_answer,
            post: post.unwrap_or_default(),
        }),
        _ => {
            return Err(Error::parse(
                line,
                "`question` and `self_answer` must appear together",
            ))
        }
    };

    Ok(Record {
        id,
        domain,
        text,
        label,
        segments,
    })
}

/// Parses one record line. `line` is the 1-based line number used in errors.
pub fn parse_record(text: &str, line: usize) -> Result<Record> {
    let raw: RawRecord =
        serde_json::from_str(text).map_err(|e| Error::parse(line, e.to_string()))?;
    record_from_raw(raw, line)
}

/// An ordered set of records plus their resolved classes.
///
/// Ambiguous records stay in `records` but have no entry in `label_map`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub label_map: BTreeMap<String, Class>,
}

impl Dataset {
    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut label_map = BTreeMap::new();
        let mut task = None;
        for r in &records {
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            if let Some(c) = r.resolved_class()? {
                match task {
                    None => task = Some(c.task()),
                    Some(t) if t != c.task() => {
                        return Err(Error::InvalidArgument(format!(
                            "record `{}` mixes classes from different tasks",
                            r.id
                        )))
                    }
                    _ => {}
                }
                label_map.insert(r.id.clone(), c);
            }
        }
        Ok(Dataset { records, label_map })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_of(&self, id: &str) -> Option<Class> {
        self.label_map.get(id).copied()
    }

    /// The task implied by the resolved labels, if any record is labeled.
    pub fn task(&self) -> Option<Task> {
        self.label_map.values().next().map(|c| c.task())
    }

    pub fn class_counts(&self) -> BTreeMap<Class, usize> {
        let mut counts = BTreeMap::new();
        for c in self.label_map.values() {
            *counts.entry(*c).or_insert(0) += 1;
        }
        counts
    }

    /// Labeled records in file order.
    pub fn labeled(&self) -> impl Iterator<Item = (&Record, Class)> {
        self.records
            .iter()
            .filter_map(|r| self.class_of(&r.id).map(|c| (r, c)))
    }

    fn subset(&self, keep: &HashSet<&str>) -> Dataset {
        let records: Vec<Record> = self
            .records
            .iter()
            .filter(|r| keep.contains(r.id.as_str()))
            .cloned()
            .collect();
        let label_map = records
            .iter()
            .filter_map(|r| self.class_of(&r.id).map(|c| (r.id.clone(), c)))
            .collect();
        Dataset { records, label_map }
    }

    /// Ids per class, in record order.
    fn ids_by_class(&self) -> BTreeMap<Class, Vec<&str>> {
        let mut by = BTreeMap::new();
        for (r, c) in self.labeled() {
            by.entry(c).or_insert_with(Vec::new).push(r.id.as_str());
        }
        by
    }

    pub fn write_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            writeln!(out, "{}", r.to_line())?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_lines(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, i + 1)?);
    }
    Dataset::from_records(records)
}

pub fn load_corpus(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file))
}

/// Majority vote over five binary annotator judgments.
pub fn aggregate_votes(votes: &[u8]) -> Result<VoteOutcome> {
    if votes.len() != 5 {
        return Err(Error::VoteCount(votes.len()));
    }
    let positive = votes.iter().filter(|&&v| v != 0).count();
    Ok(match positive {
        3..=5 => VoteOutcome::Sarcastic,
        0 | 1 => VoteOutcome::Other,
        _ => VoteOutcome::Ambiguous,
    })
}

const SARCASM_TAGS: &[&str] = &["#sarcasm", "#sarcastic", "#sarcastictweet"];

fn is_sarcasm_tag(token: &str) -> bool {
    let lowered = token.to_lowercase();
    let stem = lowered.trim_end_matches(|c: char| c.is_ascii_punctuation() && c != '_');
    SARCASM_TAGS.contains(&stem)
}

/// Drops sarcasm hashtags and `@mentions`, then collapses whitespace.
pub fn clean_tweet(text: &str) -> String {
    text.split_whitespace()
        .filter(|t| !t.starts_with('@') && !is_sarcasm_tag(t))
        .collect::<Vec<_>>()
        .join(" ")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Downsamples the majority class to the minority size. Ambiguous records
/// are dropped; record order is preserved.
pub fn balance_classes(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let task = dataset
        .task()
        .ok_or_else(|| Error::EmptyClass("any".to_owned()))?;
    let by = dataset.ids_by_class();
    for c in task.classes() {
        if by.get(&c).map_or(true, Vec::is_empty) {
            return Err(Error::EmptyClass(c.to_string()));
        }
    }
    let target = task
        .classes()
        .iter()
        .map(|c| by[c].len())
        .min()
        .unwrap_or(0);

    let mut rng = rng(seed);
    let mut keep: HashSet<&str> = HashSet::new();
    for c in task.classes() {
        let ids = &by[&c];
        if ids.len() == target {
            keep.extend(ids.iter().copied());
        } else {
            keep.extend(ids.choose_multiple(&mut rng, target).copied());
        }
    }
    Ok(dataset.subset(&keep))
}

/// Stratified split into `(train, test)`. Each class contributes
/// `round(n * train_fraction)` records to train, clamped so both sides keep
/// at least one record of every class.
pub fn split_dataset(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let by = dataset.ids_by_class();
    let classes = dataset.task().map(|t| t.classes());
    let Some(classes) = classes else {
        return Err(Error::InvalidArgument(
            "dataset has no labeled records".to_owned(),
        ));
    };
    for c in classes {
        let n = by.get(&c).map_or(0, Vec::len);
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "class `{c}` has {n} records, need at least 2 to split"
            )));
        }
    }

    let mut rng = rng(seed);
    let mut train: HashSet<&str> = HashSet::new();
    let mut test: HashSet<&str> = HashSet::new();
    for c in classes {
        let mut ids = by[&c].clone();
        ids.shuffle(&mut rng);
        let n = ids.len();
        let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
        train.extend(&ids[..n_train]);
        test.extend(&ids[n_train..]);
    }
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, class: Class) -> Record {
        Record {
            id: id.to_owned(),
            domain: Domain::Forums,
            text: format!("text {id}"),
            label: LabelSource::Gold(class),
            segments: None,
        }
    }

    fn dataset(n_sarc: usize, n_other: usize) -> Dataset {
        let mut v = Vec::new();
        for i in 0..n_sarc {
            v.push(rec(&format!("s{i}"), Class::Sarcastic));
        }
        for i in 0..n_other {
            v.push(rec(&format!("o{i}"), Class::Other));
        }
        Dataset::from_records(v).unwrap()
    }

    #[test]
    fn loads_three_lines() {
        let data = r#"{"id":"a","domain":"forums","text":"x","votes":[1,1,1,0,0]}
{"id":"b","domain":"twitter","text":"y","hashtag_label":"none"}
{"id":"c","domain":"forums","text":"z","gold":"other"}
"#;
        let ds = read_corpus(data.as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.class_of("a"), Some(Class::Sarcastic));
        assert_eq!(ds.class_of("b"), Some(Class::Other));
    }

    #[test]
    fn missing_id_names_line() {
        let data = "{\"id\":\"a\",\"domain\":\"forums\",\"text\":\"x\",\"gold\":\"other\"}\n{\"domain\":\"forums\",\"text\":\"x\",\"gold\":\"other\"}\n";
        match read_corpus(data.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        assert!(read_corpus("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_rejected() {
        let data = "{\"id\":\"a\",\"domain\":\"forums\",\"text\":\"x\",\"gold\":\"other\"}\n{\"id\":\"a\",\"domain\":\"forums\",\"text\":\"y\",\"gold\":\"other\"}\n";
        assert!(matches!(
            read_corpus(data.as_bytes()),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn two_label_sources_rejected() {
        let line =
            r#"{"id":"a","domain":"twitter","text":"x","hashtag_label":"none","gold":"other"}"#;
        assert!(parse_record(line, 1).is_err());
        let line = r#"{"id":"a","domain":"twitter","text":"x","votes":[1,1,1,0,0]}"#;
        assert!(parse_record(line, 1).is_err());
    }

    #[test]
    fn record_line_round_trips() {
        let line = r#"{"id":"a","domain":"forums","text":"x y","votes":[1,0,1,0,0],"pre":"","question":"q?","self_answer":"a.","post":"p"}"#;
        let r = parse_record(line, 1).unwrap();
        assert_eq!(r.to_line(), line);
    }

    #[test]
    fn votes_aggregate() {
        assert_eq!(
            aggregate_votes(&[1, 1, 1, 0, 0]).unwrap(),
            VoteOutcome::Sarcastic
        );
        assert_eq!(
            aggregate_votes(&[1, 0, 0, 0, 0]).unwrap(),
            VoteOutcome::Other
        );
        assert_eq!(
            aggregate_votes(&[1, 1, 0, 0, 0]).unwrap(),
            VoteOutcome::Ambiguous
        );
        assert!(matches!(
            aggregate_votes(&[1, 1, 1]),
            Err(Error::VoteCount(3))
        ));
    }

    #[test]
    fn vote_outcomes_partition_counts() {
        for mask in 0u8..32 {
            let v: Vec<u8> = (0..5).map(|i| (mask >> i) & 1).collect();
            let k = v.iter().filter(|&&x| x == 1).count();
            let expected = match k {
                3 | 4 | 5 => VoteOutcome::Sarcastic,
                0 | 1 => VoteOutcome::Other,
                _ => VoteOutcome::Ambiguous,
            };
            assert_eq!(aggregate_votes(&v).unwrap(), expected);
        }
    }

    #[test]
    fn clean_tweet_examples() {
        assert_eq!(clean_tweet("so fun @bob #sarcasm"), "so fun");
        assert_eq!(
            clean_tweet("great game #NFLlogic #sarcastictweet"),
            "great game #NFLlogic"
        );
        assert_eq!(clean_tweet("no markers here"), "no markers here");
        assert_eq!(
            clean_tweet("#SARCASM   yes #sarcasmfest"),
            "yes #sarcasmfest"
        );
        assert_eq!(clean_tweet("un. #sarcasm #whatever."), "un. #whatever.");
    }

    #[test]
    fn balance_downsamples_majority() {
        let ds = dataset(10, 4);
        let b = balance_classes(&ds, 7).unwrap();
        let counts = b.class_counts();
        assert_eq!(counts[&Class::Sarcastic], 4);
        assert_eq!(counts[&Class::Other], 4);
        assert!(ds
            .records
            .iter()
            .filter(|r| r.id.starts_with('o'))
            .all(|r| b.class_of(&r.id).is_some()));
        assert_eq!(b, balance_classes(&ds, 7).unwrap());
    }

    #[test]
    fn balance_keeps_balanced_input() {
        let ds = dataset(5, 5);
        assert_eq!(balance_classes(&ds, 1).unwrap(), ds);
    }

    #[test]
    fn balance_drops_ambiguous_and_rejects_empty_class() {
        let mut records = dataset(3, 2).records;
        records.push(Record {
            id: "amb".into(),
            domain: Domain::Forums,
            text: "t".into(),
            label: LabelSource::Votes([1, 1, 0, 0, 0]),
            segments: None,
        });
        let ds = Dataset::from_records(records).unwrap();
        let b = balance_classes(&ds, 0).unwrap();
        assert_eq!(b.len(), 4);
        assert!(b.records.iter().all(|r| r.id != "amb"));

        assert!(matches!(
            balance_classes(&dataset(3, 0), 0),
            Err(Error::EmptyClass(_))
        ));
    }

    #[test]
    fn split_is_stratified() {
        let ds = dataset(50, 50);
        let (train, test) = split_dataset(&ds, 0.8, 3).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        assert_eq!(train.class_counts()[&Class::Sarcastic], 40);
        assert_eq!(test.class_counts()[&Class::Other], 10);
        assert_eq!(
            (train.clone(), test.clone()),
            split_dataset(&ds, 0.8, 3).unwrap()
        );
    }

    #[test]
    fn split_rejects_bad_fraction_and_tiny_classes() {
        let ds = dataset(5, 5);
        assert!(split_dataset(&ds, 1.5, 0).is_err());
        assert!(split_dataset(&ds, 0.0, 0).is_err());
        assert!(split_dataset(&dataset(1, 5), 0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn clean_tweet_is_idempotent(words in prop::collection::vec(
            prop_oneof!["[a-z]{1,6}", Just("#sarcasm".to_owned()), Just("@x".to_owned()),
                        Just("#Sarcastic!".to_owned()), Just("#tag".to_owned())], 0..12)) {
            let text = words.join("  ");
            let once = clean_tweet(&text);
            prop_assert_eq!(clean_tweet(&once), once.clone());
        }

        #[test]
        fn split_partitions(n_s in 2usize..30, n_o in 2usize..30, frac in 0.05f64..0.95, seed in 0u64..1000) {
            let ds = dataset(n_s, n_o);
            let (train, test) = split_dataset(&ds, frac, seed).unwrap();
            let a: HashSet<_> = train.records.iter().map(|r| r.id.clone()).collect();
            let b: HashSet<_> = test.records.iter().map(|r| r.id.clone()).collect();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.len() + b.len(), ds.len());
        }

        #[test]
        fn balance_counts_equal(n_s in 1usize..30, n_o in 1usize..30, seed in 0u64..1000) {
            let b = balance_classes(&dataset(n_s, n_o), seed).unwrap();
            let c = b.class_counts();
            prop_assert_eq!(c[&Class::Sarcastic], c[&Class::Other]);
            prop_assert_eq!(c[&Class::Sarcastic], n_s.min(n_o));
        }
    }
}
