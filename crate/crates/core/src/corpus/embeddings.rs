//! Text-format word embeddings (`word v1 ... vd` per line, optional
//! `count dim` header).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};

/// Word form that designates the unknown-word vector in an embeddings file.
pub const UNK_WORD: &str = "<UNK>";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    unk: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs; duplicates keep the last vector.
    pub fn from_pairs<I>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut table = EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            unk: Vec::new(),
        };
        let mut unk = None;
        for (word, v) in pairs {
            if v.len() != dim {
                return Err(Error::Format(format!(
                    "vector for {word:?} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            if word == UNK_WORD {
                unk = Some(v);
            } else {
                table.insert(word, &v);
            }
        }
        table.unk = match unk {
            Some(v) => v,
            None => table.mean_vector()?,
        };
        Ok(table)
    }

    fn insert(&mut self, word: String, v: &[f64]) {
        if let Some(&i) = self.index.get(&word) {
            warn!("embedding for {word:?} repeated; keeping the last occurrence");
            self.vectors[i * self.dim..(i + 1) * self.dim].copy_from_slice(v);
        } else {
            self.index.insert(word.clone(), self.words.len());
            self.words.push(word);
            self.vectors.extend_from_slice(v);
        }
    }

    fn mean_vector(&self) -> Result<Vec<f64>> {
        if self.words.is_empty() {
            return Err(Error::Format("no embeddings to derive an UNK vector from".into()));
        }
        let mut mean = vec![0.0; self.dim];
        for row in self.vectors.chunks_exact(self.dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.words.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of words, not counting UNK.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// The word's vector, or the UNK vector.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.get(word).unwrap_or(&self.unk)
    }

    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let count = it.next()?.parse().ok()?;
    let dim = it.next()?.parse().ok()?;
    it.next().is_none().then_some((count, dim))
}

pub fn read_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut pairs = Vec::new();
    let mut dim: Option<usize> = None;
    let mut declared_count = None;
    let mut first = true;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if first {
            first = false;
            if let Some((count, d)) = parse_header(&line) {
                dim = Some(d);
                declared_count = Some(count);
                continue;
            }
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line has a field").to_string();
        let v: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Format(format!("line {lineno}: invalid component {f:?}")))
            })
            .collect::<Result<_>>()?;
        if v.is_empty() {
            return Err(Error::Format(format!("line {lineno}: no vector components")));
        }
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(Error::Format(format!(
                    "line {lineno}: dimension {} differs from {d}",
                    v.len()
                )))
            }
            _ => {}
        }
        pairs.push((word, v));
    }
    let dim = match dim {
        Some(d) if !pairs.is_empty() => d,
        _ => return Err(Error::Format("embeddings file has no vectors".into())),
    };
    if let Some(count) = declared_count {
        if count != pairs.len() {
            warn!("embeddings header declares {count} rows, found {}", pairs.len());
        }
    }
    EmbeddingTable::from_pairs(dim, pairs)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_embeddings(BufReader::new(f)).map_err(|e| e.in_file(path))
}

/// Writes `count dim` followed by one row per word. UNK is not written.
pub fn write_embeddings<W: Write>(mut w: W, table: &EmbeddingTable, precision: usize) -> Result<()> {
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for word in table.words() {
        write!(w, "{word}")?;
        for v in table.lookup(word) {
            write!(w, " {v:.precision$}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
