//! Word-vector tables in the word2vec text and binary formats.
//!
//! Text: a `V D` header line, then `V` lines of `token c1 ... cD`.
//! Binary: the ASCII header `V D\n`, then `V` records, each the token bytes,
//! one space, and `D` little-endian `f32` values. The reader also accepts
//! the newline many word2vec writers put after each record.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(EmbeddingFormat::Text),
            "binary" => Ok(EmbeddingFormat::Binary),
            other => Err(Error::InvalidArgument(format!(
                "unknown embedding format `{other}`"
            ))),
        }
    }
}

impl fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingFormat::Text => "text",
            EmbeddingFormat::Binary => "binary",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be positive".into(),
            ));
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn insert(&mut self, token: &str, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                token: token.to_owned(),
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.index.contains_key(token) {
            return Err(Error::DuplicateId(token.to_owned()));
        }
        self.index.insert(token.to_owned(), self.words.len());
        self.words.push(token.to_owned());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.words
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(w, v)| (w.as_str(), v))
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (w, v) in self.iter() {
            write!(out, "{w}")?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "{} {}\n", self.len(), self.dim)?;
        for (w, v) in self.iter() {
            out.write_all(w.as_bytes())?;
            out.write_all(b" ")?;
            for x in v {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, format: EmbeddingFormat) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        match format {
            EmbeddingFormat::Text => self.write_text(&mut w),
            EmbeddingFormat::Binary => self.write_binary(&mut w),
        }
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
    }
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let mut next = |what: &str| -> Result<usize> {
        it.next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(line_no, format!("bad header: missing {what}")))
    };
    let v = next("vocabulary size")?;
    let d = next("dimension")?;
    if d == 0 {
        return Err(Error::parse(
            line_no,
            "bad header: dimension must be positive",
        ));
    }
    Ok((v, d))
}

pub fn read_text<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::parse(1, e.to_string()))?,
        None => return Err(Error::Truncated("missing header".into())),
    };
    let (vocab, dim) = parse_header(&header, 1)?;
    let mut table = EmbeddingTable::new(dim)?;
    for (i, line) in lines {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default();
        let vector = parts
            .map(|p| p.parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(i + 1, format!("token `{token}`: {e}")))?;
        table.insert(token, &vector)?;
    }
    if table.len() != vocab {
        return Err(Error::Truncated(format!(
            "header declares {vocab} rows, found {}",
            table.len()
        )));
    }
    Ok(table)
}

fn read_until_byte<R: BufRead>(reader: &mut R, delim: u8, what: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    reader
        .read_until(delim, &mut buf)
        .map_err(|e| Error::Truncated(format!("{what}: {e}")))?;
    if buf.last() != Some(&delim) {
        return Err(Error::Truncated(format!(
            "unexpected end of stream in {what}"
        )));
    }
    buf.pop();
    Ok(buf)
}

pub fn read_binary<R: BufRead>(mut reader: R) -> Result<EmbeddingTable> {
    let header = read_until_byte(&mut reader, b'\n', "header")?;
    let header = String::from_utf8(header).map_err(|_| Error::parse(1, "header is not ASCII"))?;
    let (vocab, dim) = parse_header(&header, 1)?;
    let mut table = EmbeddingTable::new(dim)?;
    let mut bytes = vec![0u8; dim * 4];
    let mut vector = vec![0f32; dim];
    for row in 0..vocab {
        let raw = read_until_byte(&mut reader, b' ', &format!("token of row {row}"))?;
        let token = String::from_utf8(raw)
            .map_err(|_| Error::Format(format!("row {row}: token is not UTF-8")))?;
        let token = token.trim_start_matches('\n');
        reader
            .read_exact(&mut bytes)
            .map_err(|_| Error::Truncated(format!("vector of `{token}` is incomplete")))?;
        for (x, chunk) in vector.iter_mut().zip(bytes.chunks_exact(4)) {
            *x = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        table.insert(token, &vector)?;
    }
    Ok(table)
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        EmbeddingFormat::Text => read_text(reader),
        EmbeddingFormat::Binary => read_binary(reader),
    }
}

/// Mean of the in-vocabulary token vectors; the zero vector if none hit.
pub fn average_embedding<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0.0f64; table.dim()];
    let mut hits = 0usize;
    for v in tokens.iter().filter_map(|t| table.get(t.as_ref())) {
        hits += 1;
        for (s, x) in sum.iter_mut().zip(v) {
            *s += f64::from(*x);
        }
    }
    if hits > 0 {
        let n = hits as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sum
}

/// Row-major `max_len x dim` matrix of token vectors.
///
/// Long inputs keep their last `max_len` tokens; short inputs are padded
/// with zero rows at the end. Unknown tokens get zero rows.
pub fn embedding_matrix<S: AsRef<str>>(
    tokens: &[S],
    table: &EmbeddingTable,
    max_len: usize,
) -> Vec<f64> {
    let dim = table.dim();
    let mut out = vec![0.0f64; max_len * dim];
    let start = tokens.len().saturating_sub(max_len);
    for (row, tok) in tokens[start..].iter().enumerate() {
        if let Some(v) = table.get(tok.as_ref()) {
            for (o, x) in out[row * dim..(row + 1) * dim].iter_mut().zip(v) {
                *o = f64::from(*x);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2).unwrap();
        t.insert("a", &[1.0, 0.0]).unwrap();
        t.insert("b", &[0.0, 1.0]).unwrap();
        t
    }

    #[test]
    fn reads_text() {
        let t = read_text("2 3\nx 1 2 3\ny -1 0.5 0\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("y").unwrap(), &[-1.0, 0.5, 0.0]);
    }

    #[test]
    fn short_row_names_token() {
        match read_text("2 3\nx 1 2 3\nshorty 1 2\n".as_bytes()) {
            Err(Error::DimensionMismatch { token, found, .. }) => {
                assert_eq!(token, "shorty");
                assert_eq!(found, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_round_trip_and_truncation() {
        let mut t = EmbeddingTable::new(3).unwrap();
        t.insert("alpha", &[0.1, -2.5, 1e-7]).unwrap();
        t.insert("#tag", &[f32::MAX, 0.0, -0.0]).unwrap();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(read_binary(buf.as_slice()).unwrap(), t);

        for cut in [3, 10, buf.len() - 1] {
            assert!(
                matches!(read_binary(&buf[..cut]), Err(Error::Truncated(_))),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn binary_accepts_record_newlines() {
        let mut buf = b"2 1\n".to_vec();
        buf.extend(b"a ");
        buf.extend(1.5f32.to_le_bytes());
        buf.extend(b"\nb ");
        buf.extend(2.5f32.to_le_bytes());
        buf.push(b'\n');
        let t = read_binary(buf.as_slice()).unwrap();
        assert_eq!(t.get("b").unwrap(), &[2.5]);
    }

    #[test]
    fn average_examples() {
        let t = ab();
        assert_eq!(average_embedding(&["a", "b"], &t), [0.5, 0.5]);
        assert_eq!(average_embedding(&["zz", "qq"], &t), [0.0, 0.0]);
        assert_eq!(average_embedding(&["a", "a"], &t), [1.0, 0.0]);
    }

    #[test]
    fn matrix_padding_and_truncation() {
        let mut t = EmbeddingTable::new(3).unwrap();
        for (i, w) in ["t0", "t1", "t2", "t3", "t4", "t5"].iter().enumerate() {
            t.insert(w, &[i as f32; 3]).unwrap();
        }
        let m = embedding_matrix(&["t0", "t1"], &t, 4);
        assert_eq!(m.len(), 12);
        assert_eq!(&m[..6], &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(m[6..].iter().all(|&x| x == 0.0));

        let m = embedding_matrix(&["t0", "t1", "t2", "t3", "t4", "t5"], &t, 4);
        let firsts: Vec<f64> = m.chunks(3).map(|r| r[0]).collect();
        assert_eq!(firsts, [2.0, 3.0, 4.0, 5.0]);

        let empty: [&str; 0] = [];
        assert!(embedding_matrix(&empty, &t, 4).iter().all(|&x| x == 0.0));
    }

    proptest! {
        #[test]
        fn binary_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 4), 1..20)) {
            let mut t = EmbeddingTable::new(4).unwrap();
            for (i, r) in rows.iter().enumerate() {
                t.insert(&format!("w{i}"), r).unwrap();
            }
            let mut buf = Vec::new();
            t.write_binary(&mut buf).unwrap();
            let back = read_binary(buf.as_slice()).unwrap();
            for (a, b) in t.iter().zip(back.iter()) {
                prop_assert_eq!(a.0, b.0);
                prop_assert!(a.1.iter().zip(b.1).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }

        #[test]
        fn average_is_permutation_invariant_and_bounded(idx in prop::collection::vec(0usize..6, 0..12), seed in 0u64..100) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut t = EmbeddingTable::new(3).unwrap();
            for i in 0..5 {
                let v = [i as f32 - 2.0, (i * i) as f32 * 0.5, -(i as f32)];
                t.insert(&format!("w{i}"), &v).unwrap();
            }
            let tokens: Vec<String> = idx.iter().map(|i| format!("w{i}")).collect();
            let mut shuffled = tokens.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = average_embedding(&tokens, &t);
            let b = average_embedding(&shuffled, &t);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            let bound = tokens.iter().filter_map(|w| t.get(w))
                .flat_map(|v| v.iter().map(|x| f64::from(x.abs())))
                .fold(0.0, f64::max);
            prop_assert!(a.iter().all(|x| x.abs() <= bound + 1e-12));
        }
    }
}
