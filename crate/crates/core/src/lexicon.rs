//! Tag dictionaries and morphological lexicons, and the per-word feature
//! vectors derived from them.
//!
//! A lexicon maps word forms to a subset of its `m` properties. A tag
//! dictionary uses the run's tag set as its property list; a morphological
//! lexicon uses the sorted set of all feature labels in its file.
//!
//! Two encodings feed the tagger:
//!
//! * n-hot: an `m`-dim indicator vector, zero for unknown words;
//! * embedded: every property owns a trainable `l`-dim vector. With concat
//!   pooling the output has `m` fixed slots of length `l`, slot `j` holding
//!   property `j`'s vector when the word has it and zeros otherwise. Mean
//!   pooling averages the held properties' vectors instead.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TagSet;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Where a lexicon's property list comes from.
#[derive(Debug, Clone, Copy)]
pub enum PropertyInventory<'a> {
    /// Properties are the tags of the given set, in tag-set order.
    Tags(&'a TagSet),
    /// Properties are the sorted set of labels found in the file.
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    name: String,
    properties: Vec<String>,
    entries: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    lowercase_fallback: bool,
}

impl Lexicon {
    pub fn from_entries(
        name: impl Into<String>,
        properties: Vec<String>,
        entries: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        let m = properties.len();
        let mut clean = BTreeMap::new();
        for (word, mut props) in entries {
            if props.is_empty() {
                return Err(Error::InvalidInput(format!("entry {word:?} has no properties")));
            }
            if let Some(&p) = props.iter().find(|&&p| p >= m) {
                return Err(Error::InvalidInput(format!(
                    "entry {word:?} has property index {p} >= {m}"
                )));
            }
            props.sort_unstable();
            props.dedup();
            clean.insert(word, props);
        }
        Ok(Lexicon {
            name: name.into(),
            properties,
            entries: clean,
            lowercase_fallback: false,
        })
    }

    /// Parses `word<TAB>prop1;prop2;...` lines. Repeated words union their
    /// property sets.
    pub fn parse<R: BufRead>(reader: R, name: &str, inventory: PropertyInventory) -> Result<Self> {
        let mut raw: Vec<(String, Vec<String>)> = Vec::new();
        let mut seen = BTreeSet::new();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() {
                continue;
            }
            let (word, props) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected word<TAB>properties"))?;
            if word.is_empty() {
                return Err(Error::parse(lineno, "empty word"));
            }
            if props.trim().is_empty() {
                return Err(Error::parse(lineno, "empty property field"));
            }
            let mut labels = Vec::new();
            for p in props.split(';') {
                let p = p.trim();
                if p.is_empty() {
                    return Err(Error::parse(lineno, "empty property in list"));
                }
                if let PropertyInventory::Tags(ts) = inventory {
                    if ts.index(p).is_none() {
                        return Err(Error::parse(lineno, format!("unknown tag {p:?}")));
                    }
                }
                seen.insert(p.to_string());
                labels.push(p.to_string());
            }
            raw.push((word.to_string(), labels));
        }

        let properties: Vec<String> = match inventory {
            PropertyInventory::Tags(ts) => ts.names().to_vec(),
            PropertyInventory::Open => seen.into_iter().collect(),
        };
        let index_of = |label: &str| -> usize {
            match inventory {
                PropertyInventory::Tags(ts) => ts.index(label).expect("validated above"),
                PropertyInventory::Open => properties
                    .binary_search_by(|p| p.as_str().cmp(label))
                    .expect("label collected above"),
            }
        };
        let mut entries: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (word, labels) in raw {
            let e = entries.entry(word).or_default();
            e.extend(labels.iter().map(|l| index_of(l)));
        }
        Lexicon::from_entries(name, properties, entries)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn properties(&self) -> &[String] {
        &self.properties
    }

    /// Number of properties `m`.
    pub fn num_properties(&self) -> usize {
        self.properties.len()
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.entries.iter().map(|(w, p)| (w.as_str(), p.as_slice()))
    }

    pub fn set_lowercase_fallback(&mut self, on: bool) {
        self.lowercase_fallback = on;
    }

    /// Sorted property indices of `word`, if listed.
    pub fn props(&self, word: &str) -> Option<&[usize]> {
        self.entries
            .get(word)
            .or_else(|| {
                if self.lowercase_fallback {
                    self.entries.get(&word.to_lowercase())
                } else {
                    None
                }
            })
            .map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.props(word).is_some()
    }

    /// True when the property list equals the tag set, so property indices
    /// are tag indices.
    pub fn is_tag_dictionary_for(&self, tagset: &TagSet) -> bool {
        self.properties == tagset.names()
    }
}

pub fn load_lexicon(path: impl AsRef<Path>, name: &str, inventory: PropertyInventory) -> Result<Lexicon> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    Lexicon::parse(BufReader::new(f), name, inventory).map_err(|e| e.in_file(path))
}

/// Writes `word<TAB>prop1;prop2` lines in word order.
pub fn write_lexicon<W: Write>(mut w: W, lex: &Lexicon) -> Result<()> {
    for (word, props) in lex.entries() {
        let labels: Vec<&str> = props.iter().map(|&p| lex.properties[p].as_str()).collect();
        writeln!(w, "{word}\t{}", labels.join(";"))?;
    }
    w.flush()?;
    Ok(())
}

/// Membership indicator over the lexicon's properties.
pub fn n_hot(lex: &Lexicon, word: &str) -> Vec<f64> {
    let mut v = vec![0.0; lex.num_properties()];
    if let Some(props) = lex.props(word) {
        for &p in props {
            v[p] = 1.0;
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pooling {
    Concat,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    None,
    NHot,
    Embedded,
}

/// One lexicon used as a tagger feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconSource {
    pub name: String,
    pub mode: FeatureMode,
}

impl LexiconSource {
    pub fn new(name: impl Into<String>, mode: FeatureMode) -> Self {
        LexiconSource {
            name: name.into(),
            mode,
        }
    }
}

/// How lexicon sources become tagger input features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconFeatureConfig {
    /// Embedding length per property.
    pub dim: usize,
    pub pooling: Pooling,
    /// Sources in concatenation order; `FeatureMode::None` entries are skipped.
    pub sources: Vec<LexiconSource>,
}

impl Default for LexiconFeatureConfig {
    fn default() -> Self {
        LexiconFeatureConfig {
            dim: 40,
            pooling: Pooling::Concat,
            sources: Vec::new(),
        }
    }
}

impl LexiconFeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 && self.sources.iter().any(|s| s.mode == FeatureMode::Embedded) {
            return Err(Error::Config("lexicon embedding length must be > 0".into()));
        }
        Ok(())
    }

    /// Encoding for a source in `mode`, or `None` when it adds no features.
    pub fn encoding(&self, mode: FeatureMode) -> Option<LexEncoding> {
        match mode {
            FeatureMode::None => None,
            FeatureMode::NHot => Some(LexEncoding::NHot),
            FeatureMode::Embedded => Some(LexEncoding::Embedded {
                dim: self.dim,
                pooling: self.pooling,
            }),
        }
    }

    /// Picks the configured sources out of `lexicons` in declared order.
    pub fn features(&self, lexicons: &[Lexicon]) -> Result<Vec<LexiconFeature>> {
        self.validate()?;
        self.sources
            .iter()
            .filter_map(|src| self.encoding(src.mode).map(|enc| (src, enc)))
            .map(|(src, encoding)| {
                lexicons
                    .iter()
                    .find(|l| l.name() == src.name)
                    .map(|l| LexiconFeature {
                        lexicon: l.clone(),
                        encoding,
                    })
                    .ok_or_else(|| Error::Config(format!("no lexicon named {:?}", src.name)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LexEncoding {
    NHot,
    Embedded { dim: usize, pooling: Pooling },
}

/// One lexicon source together with its encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconFeature {
    pub lexicon: Lexicon,
    pub encoding: LexEncoding,
}

impl LexiconFeature {
    pub fn dim(&self) -> usize {
        let m = self.lexicon.num_properties();
        match self.encoding {
            LexEncoding::NHot => m,
            LexEncoding::Embedded {
                dim,
                pooling: Pooling::Concat,
            } => m * dim,
            LexEncoding::Embedded {
                dim,
                pooling: Pooling::Mean,
            } => dim,
        }
    }

    /// Shape of the property-embedding matrix, if this source has one.
    pub fn embedding_shape(&self) -> Option<[usize; 2]> {
        match self.encoding {
            LexEncoding::NHot => None,
            LexEncoding::Embedded { dim, .. } => Some([self.lexicon.num_properties(), dim]),
        }
    }

    /// Writes the feature vector of `word` into `out` (length `self.dim()`).
    pub fn encode_into(&self, word: &str, emb: Option<&Tensor>, out: &mut [f64]) {
        out.fill(0.0);
        let Some(props) = self.lexicon.props(word) else {
            return;
        };
        match self.encoding {
            LexEncoding::NHot => {
                for &p in props {
                    out[p] = 1.0;
                }
            }
            LexEncoding::Embedded { dim, pooling } => {
                let emb = emb.expect("embedded lexicon features need property embeddings");
                match pooling {
                    Pooling::Concat => {
                        for &p in props {
                            out[p * dim..(p + 1) * dim].copy_from_slice(emb.row(p));
                        }
                    }
                    Pooling::Mean => {
                        let scale = 1.0 / props.len() as f64;
                        for &p in props {
                            for (o, v) in out.iter_mut().zip(emb.row(p)) {
                                *o += scale * v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates the gradient of the feature vector into `grad_emb`.
    pub fn backward(&self, word: &str, d_out: &[f64], grad_emb: Option<&mut Tensor>) {
        let (LexEncoding::Embedded { dim, pooling }, Some(g)) = (self.encoding, grad_emb) else {
            return;
        };
        let Some(props) = self.lexicon.props(word) else {
            return;
        };
        match pooling {
            Pooling::Concat => {
                for &p in props {
                    for (gv, d) in g.row_mut(p).iter_mut().zip(&d_out[p * dim..(p + 1) * dim]) {
                        *gv += d;
                    }
                }
            }
            Pooling::Mean => {
                let scale = 1.0 / props.len() as f64;
                for &p in props {
                    for (gv, d) in g.row_mut(p).iter_mut().zip(d_out) {
                        *gv += scale * d;
                    }
                }
            }
        }
    }
}

/// Embedded lexicon features of one word for a single source.
pub fn embed_lex(lex: &Lexicon, word: &str, emb: &Tensor, cfg: &LexiconFeatureConfig) -> Result<Vec<f64>> {
    let feature = LexiconFeature {
        lexicon: lex.clone(),
        encoding: LexEncoding::Embedded {
            dim: cfg.dim,
            pooling: cfg.pooling,
        },
    };
    check_embedding(&feature, Some(emb))?;
    let mut out = vec![0.0; feature.dim()];
    feature.encode_into(word, Some(emb), &mut out);
    Ok(out)
}

fn check_embedding(feature: &LexiconFeature, emb: Option<&Tensor>) -> Result<()> {
    match (feature.embedding_shape(), emb) {
        (None, _) => Ok(()),
        (Some(shape), Some(t)) if t.shape() == shape => Ok(()),
        (Some(shape), t) => Err(Error::Config(format!(
            "lexicon {} needs a {shape:?} embedding, got {:?}",
            feature.lexicon.name(),
            t.map(|t| t.shape().to_vec())
        ))),
    }
}

/// Concatenation of every source's feature vector, in declared order.
pub fn merge_sources(features: &[LexiconFeature], embeddings: &[Option<Tensor>], word: &str) -> Result<Vec<f64>> {
    if features.len() != embeddings.len() {
        return Err(Error::Config(format!(
            "{} lexicon sources but {} embedding slots",
            features.len(),
            embeddings.len()
        )));
    }
    let total: usize = features.iter().map(LexiconFeature::dim).sum();
    let mut out = vec![0.0; total];
    let mut offset = 0;
    for (f, e) in features.iter().zip(embeddings) {
        check_embedding(f, e.as_ref())?;
        let d = f.dim();
        f.encode_into(word, e.as_ref(), &mut out[offset..offset + d]);
        offset += d;
    }
    Ok(out)
}
