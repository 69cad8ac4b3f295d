//! Synthetic benchmark languages.
//!
//! Each language is a hidden Markov model over the universal tags whose
//! emissions are generated word forms (syllable stems with tag-specific
//! suffixes, so characters carry tag information). Besides gold corpora a
//! language comes with a noisy multi-source projection of its training pool,
//! a tag dictionary and a morphological lexicon covering a fixed fraction of
//! the word types, and pre-trained style word vectors.
//!
//! Projection noise: every pool sentence draws a coverage `c`; each source
//! links each token with probability `c`, and the tag the sources vote for is
//! correct with probability `vote_base + vote_gain * c`.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, Zipf};

use crate::corpus::{save_corpus, write_embeddings, EmbeddingTable, Sentence, TagId, TagSet, NUM_TAGS};
use crate::error::{Error, Result};
use crate::lexicon::{write_lexicon, Lexicon};
use crate::projection::{write_projection, AlignedVote, ProjectionBlock, SourceVote};

// Tag indices in universal order.
const NOUN: usize = 0;
const VERB: usize = 1;
const ADJ: usize = 2;
const ADV: usize = 3;
const NUM: usize = 7;
const PUNCT: usize = 10;

const OPEN_CLASSES: [usize; 4] = [NOUN, VERB, ADJ, ADV];

/// Bundle file names inside a language directory.
pub const POOL_FILE: &str = "pool.gold.tsv";
pub const PROJECTION_FILE: &str = "projection.txt";
pub const DEV_FILE: &str = "dev.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const TAG_DICT_FILE: &str = "wiktionary.tsv";
pub const MORPH_FILE: &str = "unimorph.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub const TAG_DICT_NAME: &str = "wiktionary";
pub const MORPH_NAME: &str = "unimorph";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub languages: usize,
    pub pool_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub num_sources: usize,
    pub min_coverage: f64,
    pub vote_base: f64,
    pub vote_gain: f64,
    /// Probability that a linked source votes for the projected tag.
    pub source_accuracy: f64,
    /// Fraction of word types listed in each lexicon.
    pub lexicon_fraction: f64,
    /// Fraction of word types with a pre-trained vector.
    pub embedding_fraction: f64,
    pub embedding_dim: usize,
    /// Fraction of open-class forms that also belong to a second class.
    pub ambiguity: f64,
    /// Multiplies the open-class vocabulary sizes.
    pub vocab_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            languages: 1,
            pool_size: 3000,
            dev_size: 200,
            test_size: 500,
            min_len: 4,
            max_len: 14,
            num_sources: 21,
            min_coverage: 0.05,
            vote_base: 0.6,
            vote_gain: 0.35,
            source_accuracy: 0.85,
            lexicon_fraction: 0.4,
            embedding_fraction: 0.9,
            embedding_dim: 64,
            ambiguity: 0.08,
            vocab_scale: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        prob("min_coverage", self.min_coverage)?;
        prob("source_accuracy", self.source_accuracy)?;
        prob("lexicon_fraction", self.lexicon_fraction)?;
        prob("embedding_fraction", self.embedding_fraction)?;
        prob("ambiguity", self.ambiguity)?;
        prob("vote_base", self.vote_base)?;
        prob("vote_base + vote_gain", self.vote_base + self.vote_gain)?;
        if self.vote_gain < 0.0 {
            return Err(Error::Config("vote_gain must be >= 0".into()));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "invalid sentence length range {}..={}",
                self.min_len, self.max_len
            )));
        }
        if self.num_sources == 0 || self.embedding_dim == 0 || self.languages == 0 {
            return Err(Error::Config(
                "sources, embedding dimension and languages must be > 0".into(),
            ));
        }
        if !(self.vocab_scale > 0.0 && self.vocab_scale.is_finite()) {
            return Err(Error::Config("vocab_scale must be positive".into()));
        }
        Ok(())
    }
}

/// One generated language.
#[derive(Debug, Clone)]
pub struct SynthLanguage {
    pub name: String,
    pub tagset: TagSet,
    /// Gold-tagged training pool, aligned with `projection` and `coverage`.
    pub pool: Vec<Sentence>,
    pub projection: Vec<ProjectionBlock>,
    /// Coverage drawn for each pool sentence.
    pub coverage: Vec<f64>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
    pub tag_dictionary: Lexicon,
    pub morph_lexicon: Lexicon,
    pub embeddings: EmbeddingTable,
    /// Number of distinct word forms in the language.
    pub num_types: usize,
}

struct Grammar {
    initial: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    /// Forms each tag emits, most frequent first.
    emissions: Vec<Vec<usize>>,
    zipf: Vec<Zipf<f64>>,
}

struct Inventory {
    forms: Vec<String>,
    /// Tags of each form, ascending.
    tags: Vec<Vec<TagId>>,
    /// Morphological features of each open-class form.
    features: Vec<Vec<String>>,
}

// Transition weights, rows = previous tag, universal order.
const BASE_TRANSITIONS: [[f64; NUM_TAGS]; NUM_TAGS] = [
    [2.0, 4.0, 0.5, 0.5, 0.5, 0.5, 3.0, 0.3, 1.5, 1.0, 3.0, 0.1],
    [1.5, 0.5, 1.0, 2.0, 2.0, 3.0, 2.0, 0.5, 0.5, 1.5, 1.5, 0.1],
    [6.0, 0.5, 0.5, 0.2, 0.2, 0.2, 0.5, 0.1, 1.0, 0.2, 1.0, 0.1],
    [0.5, 3.0, 3.0, 0.5, 0.5, 0.5, 0.5, 0.1, 0.3, 0.3, 1.0, 0.1],
    [0.5, 6.0, 0.3, 1.0, 0.2, 0.2, 0.5, 0.1, 0.3, 0.5, 0.8, 0.1],
    [6.0, 0.2, 3.0, 0.3, 0.1, 0.1, 0.1, 1.0, 0.1, 0.1, 0.1, 0.1],
    [2.0, 0.2, 1.0, 0.2, 1.0, 5.0, 0.1, 1.0, 0.1, 0.1, 0.1, 0.1],
    [5.0, 0.3, 0.5, 0.1, 0.1, 0.1, 0.5, 0.2, 0.3, 0.1, 1.0, 0.1],
    [2.0, 2.0, 1.0, 0.5, 1.5, 2.0, 0.5, 0.5, 0.1, 0.3, 0.2, 0.1],
    [0.5, 5.0, 0.5, 0.5, 0.2, 0.3, 0.3, 0.2, 0.1, 0.1, 0.3, 0.1],
    [1.5, 0.5, 0.5, 0.5, 1.5, 2.0, 1.0, 0.5, 2.0, 0.3, 0.2, 0.2],
    [1.0, 0.5, 0.3, 0.3, 0.3, 0.3, 0.3, 0.2, 0.3, 0.2, 1.0, 2.0],
];
const BASE_INITIAL: [f64; NUM_TAGS] = [2.0, 0.5, 0.5, 0.5, 2.0, 3.0, 1.0, 0.3, 0.3, 0.3, 0.1, 0.1];

/// Most likely wrong projection for each gold tag.
const CONFUSION: [TagId; NUM_TAGS] = [2, 0, 0, 2, 5, 4, 9, 2, 6, 6, 11, 0];

const OPEN_VOCAB: [usize; 4] = [1200, 700, 400, 120];
// PRON DET ADP NUM CONJ PRT PUNCT X
const CLOSED_VOCAB: [usize; NUM_TAGS] = [0, 0, 0, 0, 15, 10, 20, 40, 6, 10, 6, 30];

const SUFFIXES: [[(&str, &str); 2]; 4] = [
    [("a", "SG"), ("ek", "PL")],
    [("ot", "PRS"), ("il", "PST")],
    [("en", "POS"), ("ast", "CMPR")],
    [("ly", "MAN"), ("ow", "LOC")],
];
const UNIMORPH_POS: [&str; 4] = ["N", "V", "ADJ", "ADV"];
const PUNCTUATION: [&str; 6] = [".", ",", "!", "?", ";", ":"];
const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const NUCLEI: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 4] = ["", "", "n", "r"];

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Mixes a base distribution with a flat Dirichlet draw.
fn perturb(base: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut b = base.to_vec();
    normalize(&mut b);
    let mut d: Vec<f64> = (0..base.len()).map(|_| Exp1.sample(rng)).collect();
    normalize(&mut d);
    b.iter().zip(&d).map(|(x, y)| 0.8 * x + 0.2 * y).collect()
}

fn categorical(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn syllable(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{}{}{}",
        ONSETS[rng.random_range(0..ONSETS.len())],
        NUCLEI[rng.random_range(0..NUCLEI.len())],
        CODAS[rng.random_range(0..CODAS.len())]
    )
}

fn stem(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    (0..rng.random_range(min..=max)).map(|_| syllable(rng)).collect()
}

fn build_inventory(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Inventory, Vec<Vec<usize>>) {
    let mut inv = Inventory {
        forms: Vec::new(),
        tags: Vec::new(),
        features: Vec::new(),
    };
    let mut seen: HashSet<String> = HashSet::new();
    let mut by_tag: Vec<Vec<usize>> = vec![Vec::new(); NUM_TAGS];
    let mut add = |inv: &mut Inventory, form: String, tag: TagId, feats: Vec<String>| -> bool {
        if !seen.insert(form.clone()) {
            return false;
        }
        by_tag[tag].push(inv.forms.len());
        inv.forms.push(form);
        inv.tags.push(vec![tag]);
        inv.features.push(feats);
        true
    };

    for (ci, &tag) in OPEN_CLASSES.iter().enumerate() {
        let n = ((OPEN_VOCAB[ci] as f64 * cfg.vocab_scale).round() as usize).max(1);
        let mut made = 0;
        while made < n {
            let base = stem(rng, 1, 3);
            let mut feats = vec![UNIMORPH_POS[ci].to_string()];
            // Most forms carry a regular suffix; the rest are bare stems.
            let form = if rng.random_bool(0.8) {
                let (sfx, feat) = SUFFIXES[ci][rng.random_range(0..2)];
                feats.push(feat.to_string());
                format!("{base}{sfx}")
            } else {
                base
            };
            if add(&mut inv, form, tag, feats) {
                made += 1;
            }
        }
    }
    for tag in 0..NUM_TAGS {
        let n = CLOSED_VOCAB[tag];
        let mut made = 0;
        while made < n {
            let form = match tag {
                PUNCT => PUNCTUATION[made].to_string(),
                NUM => rng.random_range(0..10_000u32).to_string(),
                11 => format!("{}'{}", syllable(rng), syllable(rng)),
                _ => stem(rng, 1, 2),
            };
            if add(&mut inv, form, tag, Vec::new()) {
                made += 1;
            }
        }
    }

    // Shared forms: an open-class word that may also appear as another open class.
    let open_forms: Vec<usize> = OPEN_CLASSES.iter().flat_map(|&t| by_tag[t].clone()).collect();
    let n_amb = (open_forms.len() as f64 * cfg.ambiguity).round() as usize;
    for i in sample(rng, open_forms.len(), n_amb).into_vec() {
        let f = open_forms[i];
        let own = inv.tags[f][0];
        let other = loop {
            let t = OPEN_CLASSES[rng.random_range(0..OPEN_CLASSES.len())];
            if t != own {
                break t;
            }
        };
        let pos = rng.random_range(0..=by_tag[other].len());
        by_tag[other].insert(pos, f);
        inv.tags[f].push(other);
        inv.tags[f].sort_unstable();
        let ci = OPEN_CLASSES.iter().position(|&t| t == other).expect("open class");
        inv.features[f].push(UNIMORPH_POS[ci].to_string());
    }
    (inv, by_tag)
}

fn build_grammar(by_tag: Vec<Vec<usize>>, rng: &mut ChaCha8Rng) -> Grammar {
    let initial = perturb(&BASE_INITIAL, rng);
    let transitions = BASE_TRANSITIONS.iter().map(|row| perturb(row, rng)).collect();
    let zipf = by_tag
        .iter()
        .map(|forms| Zipf::new(forms.len() as f64, 1.05).expect("non-empty emission list"))
        .collect();
    Grammar {
        initial,
        transitions,
        emissions: by_tag,
        zipf,
    }
}

fn sample_sentence(
    cfg: &SynthConfig,
    g: &Grammar,
    inv: &Inventory,
    rng: &mut ChaCha8Rng,
) -> Sentence {
    let len = rng.random_range(cfg.min_len..=cfg.max_len);
    let mut tags = Vec::with_capacity(len);
    let mut t = categorical(&g.initial, rng);
    for _ in 0..len {
        tags.push(t);
        t = categorical(&g.transitions[t], rng);
    }
    let tokens = tags
        .iter()
        .map(|&t| {
            let r = g.zipf[t].sample(rng) as usize - 1;
            inv.forms[g.emissions[t][r]].clone()
        })
        .collect();
    Sentence::tagged(tokens, tags).expect("generated sentence is well formed")
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn wrong_tag(gold: TagId, rng: &mut ChaCha8Rng) -> TagId {
    if rng.random_bool(0.7) {
        return CONFUSION[gold];
    }
    let t = rng.random_range(0..NUM_TAGS - 1);
    if t >= gold {
        t + 1
    } else {
        t
    }
}

fn project(cfg: &SynthConfig, s: &Sentence, rng: &mut ChaCha8Rng) -> (ProjectionBlock, f64) {
    let c = rng.random_range(cfg.min_coverage..=1.0);
    let q = cfg.vote_base + cfg.vote_gain * c;
    let projected: Vec<TagId> = s
        .tags
        .iter()
        .map(|t| {
            let gold = t.expect("gold pool");
            if rng.random_bool(q) {
                gold
            } else {
                wrong_tag(gold, rng)
            }
        })
        .collect();
    let mut votes = Vec::new();
    for src in 0..cfg.num_sources {
        let source = format!("s{:02}", src + 1);
        for (position, &p) in projected.iter().enumerate() {
            if !rng.random_bool(c) {
                continue;
            }
            let tag = if rng.random_bool(cfg.source_accuracy) {
                p
            } else {
                wrong_tag(p, rng)
            };
            let alignment = round3(rng.random_range(0.3..=1.0));
            let confidence = round3(rng.random_range(0.5..=1.0));
            votes.push(AlignedVote {
                source: source.clone(),
                position,
                vote: SourceVote::single(tag, alignment, confidence),
            });
        }
    }
    (
        ProjectionBlock {
            tokens: s.tokens.clone(),
            votes,
        },
        c,
    )
}

fn lexicon_sample(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = (n as f64 * fraction).round() as usize;
    let mut idx = sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

fn build_lexicons(cfg: &SynthConfig, inv: &Inventory, tagset: &TagSet, rng: &mut ChaCha8Rng) -> Result<(Lexicon, Lexicon)> {
    let n = inv.forms.len();
    let dict_entries: BTreeMap<String, Vec<usize>> = lexicon_sample(n, cfg.lexicon_fraction, rng)
        .into_iter()
        .map(|i| (inv.forms[i].clone(), inv.tags[i].clone()))
        .collect();
    let tag_dictionary = Lexicon::from_entries(TAG_DICT_NAME, tagset.names().to_vec(), dict_entries)?;

    let open: Vec<usize> = (0..n).filter(|&i| !inv.features[i].is_empty()).collect();
    let chosen = lexicon_sample(open.len(), cfg.lexicon_fraction, rng);
    let mut labels: Vec<String> = open
        .iter()
        .flat_map(|&i| inv.features[i].iter().cloned())
        .collect();
    labels.sort();
    labels.dedup();
    let morph_entries: BTreeMap<String, Vec<usize>> = chosen
        .into_iter()
        .map(|j| {
            let i = open[j];
            let props = inv.features[i]
                .iter()
                .map(|f| labels.binary_search(f).expect("collected label"))
                .collect();
            (inv.forms[i].clone(), props)
        })
        .collect();
    let morph_lexicon = Lexicon::from_entries(MORPH_NAME, labels, morph_entries)?;
    Ok((tag_dictionary, morph_lexicon))
}

fn build_embeddings(cfg: &SynthConfig, inv: &Inventory, rng: &mut ChaCha8Rng) -> Result<EmbeddingTable> {
    let d = cfg.embedding_dim;
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let centroids: Vec<Vec<f64>> = (0..NUM_TAGS)
        .map(|_| (0..d).map(|_| unit.sample(rng)).collect())
        .collect();
    let scale = 1.0 / (d as f64).sqrt();
    let rows = lexicon_sample(inv.forms.len(), cfg.embedding_fraction, rng);
    let pairs: Vec<(String, Vec<f64>)> = rows
        .into_iter()
        .map(|i| {
            let tags = &inv.tags[i];
            let v = (0..d)
                .map(|j| {
                    let c: f64 = tags.iter().map(|&t| centroids[t][j]).sum::<f64>() / tags.len() as f64;
                    round3(scale * (c + 1.5 * unit.sample(rng)))
                })
                .collect();
            (inv.forms[i].clone(), v)
        })
        .collect();
    EmbeddingTable::from_pairs(d, pairs)
}

/// Generates language `index` of the configured benchmark.
pub fn generate_language(cfg: &SynthConfig, index: usize) -> Result<SynthLanguage> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let tagset = TagSet::universal();
    let (inv, by_tag) = build_inventory(cfg, &mut rng);
    let grammar = build_grammar(by_tag, &mut rng);

    let corpus = |n: usize, rng: &mut ChaCha8Rng| -> Vec<Sentence> {
        (0..n).map(|_| sample_sentence(cfg, &grammar, &inv, rng)).collect()
    };
    let pool = corpus(cfg.pool_size, &mut rng);
    let dev = corpus(cfg.dev_size, &mut rng);
    let test = corpus(cfg.test_size, &mut rng);

    let mut projection = Vec::with_capacity(pool.len());
    let mut coverage = Vec::with_capacity(pool.len());
    for s in &pool {
        let (block, c) = project(cfg, s, &mut rng);
        projection.push(block);
        coverage.push(c);
    }
    let (tag_dictionary, morph_lexicon) = build_lexicons(cfg, &inv, &tagset, &mut rng)?;
    let embeddings = build_embeddings(cfg, &inv, &mut rng)?;
    Ok(SynthLanguage {
        name: format!("lang{index:02}"),
        tagset,
        pool,
        projection,
        coverage,
        dev,
        test,
        tag_dictionary,
        morph_lexicon,
        embeddings,
        num_types: inv.forms.len(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).in_file(path))
}

impl SynthLanguage {
    /// Writes the language's files into `dir`, which is created if needed.
    pub fn write_bundle(&self, dir: &Path, cfg: &SynthConfig) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
        save_corpus(dir.join(POOL_FILE), &self.pool, &self.tagset)?;
        save_corpus(dir.join(DEV_FILE), &self.dev, &self.tagset)?;
        save_corpus(dir.join(TEST_FILE), &self.test, &self.tagset)?;
        write_projection(create(&dir.join(PROJECTION_FILE))?, &self.projection, &self.tagset)?;
        write_lexicon(create(&dir.join(TAG_DICT_FILE))?, &self.tag_dictionary)?;
        write_lexicon(create(&dir.join(MORPH_FILE))?, &self.morph_lexicon)?;
        let mut emb = create(&dir.join(EMBEDDINGS_FILE))?;
        write_embeddings(&mut emb, &self.embeddings, 3)?;
        emb.flush()?;
        let mut m = create(&dir.join(MANIFEST_FILE))?;
        writeln!(m, "name={}", self.name)?;
        writeln!(m, "seed={}", cfg.seed)?;
        writeln!(m, "pool={}", self.pool.len())?;
        writeln!(m, "dev={}", self.dev.len())?;
        writeln!(m, "test={}", self.test.len())?;
        writeln!(m, "sources={}", cfg.num_sources)?;
        writeln!(m, "types={}", self.num_types)?;
        writeln!(m, "lexicon_fraction={}", cfg.lexicon_fraction)?;
        writeln!(m, "vote_correct={}+{}*coverage", cfg.vote_base, cfg.vote_gain)?;
        m.flush()?;
        Ok(())
    }
}

/// Generates every language and writes `out/langNN/` bundles.
pub fn write_benchmark(cfg: &SynthConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    (0..cfg.languages)
        .map(|i| {
            let lang = generate_language(cfg, i)?;
            let dir = out.join(&lang.name);
            lang.write_bundle(&dir, cfg)?;
            Ok(dir)
        })
        .collect()
}
