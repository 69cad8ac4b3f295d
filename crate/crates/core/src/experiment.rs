//! Experiment configuration and single training runs.
//!
//! Configs are flat `key = value` files; command-line flags override keys
//! through [`ExperimentConfig::set`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{load_embeddings, read_corpus, EmbeddingTable, Sentence, TagId, TagSet};
use crate::error::{Error, Result};
use crate::eval::{oov_split, EvalReport, RunKey, SelectionMode};
use crate::lexicon::{FeatureMode, Lexicon, LexiconSource, Pooling, PropertyInventory};
use crate::projection::{project_corpus, random_indices, read_projection, top_k_indices, DEFAULT_SELECTION_SIZE};
use crate::tagger::{train, DropoutScheme, ModelDims, Tagger, TrainConfig, TrainInputs, TrainReport};

/// How one lexicon takes part in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexMode {
    None,
    /// Decode-time type constraints (tag dictionaries only).
    TypeConstraints,
    NHot,
    Embedded,
}

impl FromStr for LexMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(LexMode::None),
            "tc" => Ok(LexMode::TypeConstraints),
            "nhot" => Ok(LexMode::NHot),
            "embed" => Ok(LexMode::Embedded),
            _ => Err(Error::Config(format!(
                "unknown lexicon mode {s:?} (expected none, tc, nhot or embed)"
            ))),
        }
    }
}

impl LexMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LexMode::None => "none",
            LexMode::TypeConstraints => "tc",
            LexMode::NHot => "nhot",
            LexMode::Embedded => "embed",
        }
    }
}

/// Which part of the training pool a run trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    All,
    Top(SelectionMode),
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Selection::All),
            other => other.parse().map(Selection::Top).map_err(|_| {
                Error::Config(format!(
                    "unknown selection {s:?} (expected all, coverage or random)"
                ))
            }),
        }
    }
}

impl Selection {
    pub fn as_str(self) -> &'static str {
        match self {
            Selection::All => "all",
            Selection::Top(m) => m.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Tagged training pool (gold or already projected).
    pub train: Option<PathBuf>,
    /// Projection file decoded into the training pool.
    pub projection: Option<PathBuf>,
    /// Number of configured projection sources; defaults to the sources seen.
    pub sources: Option<usize>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub lexicons: BTreeMap<String, PathBuf>,
    pub lex_mode: LexMode,
    pub lex_modes: BTreeMap<String, LexMode>,
    /// Retry lexicon lookups with the lowercased word form.
    pub lex_lowercase: bool,
    pub selection: Selection,
    pub k: usize,
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub seeds: Vec<u64>,
    pub train_config: TrainConfig,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: None,
            projection: None,
            sources: None,
            dev: None,
            test: None,
            embeddings: None,
            lexicons: BTreeMap::new(),
            lex_mode: LexMode::None,
            lex_modes: BTreeMap::new(),
            lex_lowercase: false,
            selection: Selection::Top(SelectionMode::Coverage),
            k: DEFAULT_SELECTION_SIZE,
            sizes: Vec::new(),
            samples: 5,
            seeds: vec![1, 2, 3],
            train_config: TrainConfig::default(),
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies the settings of a config text on top of this one.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected key = value"))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || -> Option<PathBuf> { (!value.is_empty()).then(|| PathBuf::from(value)) };
        let t = &mut self.train_config;
        match key {
            "train" => self.train = path(),
            "projection" => self.projection = path(),
            "sources" => self.sources = Some(parse_num(key, value)?),
            "dev" => self.dev = path(),
            "test" => self.test = path(),
            "embeddings" => self.embeddings = path(),
            "lex_mode" => self.lex_mode = value.parse()?,
            "lex_lowercase" => self.lex_lowercase = parse_num(key, value)?,
            "lex_dim" => t.lexicon.dim = parse_num(key, value)?,
            "lex_pooling" => {
                t.lexicon.pooling = match value {
                    "concat" => Pooling::Concat,
                    "mean" => Pooling::Mean,
                    _ => return Err(Error::Config(format!("unknown pooling {value:?}"))),
                }
            }
            "selection" | "mode" => self.selection = value.parse()?,
            "k" => self.k = parse_num(key, value)?,
            "sizes" => self.sizes = parse_list(key, value)?,
            "samples" => self.samples = parse_num(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "epochs" => t.epochs = parse_num(key, value)?,
            "word_dropout" => t.word_dropout = parse_num(key, value)?,
            "dropout_scheme" => {
                t.dropout_scheme = match value {
                    "frequency" => DropoutScheme::FrequencyScaled,
                    "fixed" => DropoutScheme::Fixed,
                    _ => return Err(Error::Config(format!("unknown dropout scheme {value:?}"))),
                }
            }
            "learning_rate" => t.learning_rate = parse_num(key, value)?,
            "min_freq" => t.min_freq = parse_num(key, value)?,
            "word_dim" => t.dims.word_dim = parse_num(key, value)?,
            "char_dim" => t.dims.char_dim = parse_num(key, value)?,
            "char_hidden" => t.dims.char_hidden = parse_num(key, value)?,
            "word_hidden" => t.dims.word_hidden = parse_num(key, value)?,
            "out" => self.out = path(),
            _ => {
                if let Some(name) = key.strip_prefix("lexicon.") {
                    check_name(name)?;
                    match path() {
                        Some(p) => self.lexicons.insert(name.to_string(), p),
                        None => self.lexicons.remove(name),
                    };
                } else if let Some(name) = key.strip_prefix("lex_mode.") {
                    check_name(name)?;
                    self.lex_modes.insert(name.to_string(), value.parse()?);
                } else {
                    return Err(Error::Config(format!("unknown config key {key:?}")));
                }
            }
        }
        Ok(())
    }

    /// Effective mode of lexicon `name`.
    pub fn mode_of(&self, name: &str) -> LexMode {
        self.lex_modes.get(name).copied().unwrap_or(self.lex_mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.is_some() == self.projection.is_some() {
            return Err(Error::Config(
                "exactly one of train and projection must be set".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if let Some(name) = self.lex_modes.keys().find(|n| !self.lexicons.contains_key(*n)) {
            return Err(Error::Config(format!("lex_mode.{name} set but lexicon.{name} is not")));
        }
        let tc = self
            .lexicons
            .keys()
            .filter(|n| self.mode_of(n) == LexMode::TypeConstraints)
            .count();
        if tc > 1 {
            return Err(Error::Config("at most one lexicon can be used for type constraints".into()));
        }
        let mut cfg = self.train_config.clone();
        cfg.lexicon.sources = self.lexicon_sources();
        cfg.validate()
    }

    /// Lexicons that feed the tagger input, in name order.
    pub fn lexicon_sources(&self) -> Vec<LexiconSource> {
        self.lexicons
            .keys()
            .filter_map(|n| match self.mode_of(n) {
                LexMode::NHot => Some(LexiconSource::new(n.clone(), FeatureMode::NHot)),
                LexMode::Embedded => Some(LexiconSource::new(n.clone(), FeatureMode::Embedded)),
                LexMode::None | LexMode::TypeConstraints => None,
            })
            .collect()
    }

    /// The lexicon used for decode-time type constraints, if any.
    pub fn type_constraint_lexicon(&self) -> Option<&str> {
        self.lexicons
            .keys()
            .find(|n| self.mode_of(n) == LexMode::TypeConstraints)
            .map(String::as_str)
    }

    /// Training settings of the run with `seed`.
    pub fn train_config_for(&self, seed: u64) -> TrainConfig {
        let mut cfg = self.train_config.clone();
        cfg.seed = seed;
        cfg.lexicon.sources = self.lexicon_sources();
        cfg
    }

    /// Every setting that changes what a run computes, one `key=value` per
    /// line in a fixed order. Run coordinates (k, sample, seed) and the
    /// output location are left out.
    pub fn canonical(&self) -> String {
        let p = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let t = &self.train_config;
        let d: &ModelDims = &t.dims;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("train", p(&self.train));
        kv("projection", p(&self.projection));
        kv("sources", self.sources.map_or(String::new(), |n| n.to_string()));
        kv("dev", p(&self.dev));
        kv("test", p(&self.test));
        kv("embeddings", p(&self.embeddings));
        for (name, path) in &self.lexicons {
            kv(&format!("lexicon.{name}"), path.display().to_string());
            kv(&format!("lex_mode.{name}"), self.mode_of(name).as_str().into());
        }
        kv("lex_lowercase", self.lex_lowercase.to_string());
        kv("lex_dim", t.lexicon.dim.to_string());
        kv(
            "lex_pooling",
            match t.lexicon.pooling {
                Pooling::Concat => "concat",
                Pooling::Mean => "mean",
            }
            .into(),
        );
        kv("selection", self.selection.as_str().into());
        kv("epochs", t.epochs.to_string());
        kv("word_dropout", t.word_dropout.to_string());
        kv(
            "dropout_scheme",
            match t.dropout_scheme {
                DropoutScheme::FrequencyScaled => "frequency",
                DropoutScheme::Fixed => "fixed",
            }
            .into(),
        );
        kv("learning_rate", t.learning_rate.to_string());
        kv("min_freq", t.min_freq.to_string());
        kv("word_dim", d.word_dim.to_string());
        kv("char_dim", d.char_dim.to_string());
        kv("char_hidden", d.char_hidden.to_string());
        kv("word_hidden", d.word_hidden.to_string());
        s
    }

    /// Short hex digest of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Reads every file the config refers to.
    pub fn load(&self) -> Result<Resources> {
        self.validate()?;
        self.check_paths()?;
        let tagset = TagSet::universal();
        let pool = if let Some(path) = &self.train {
            read_corpus(path, &tagset)?
        } else {
            let path = self.projection.as_ref().expect("validated");
            let blocks = read_projection(path, &tagset)?;
            let seen: BTreeSet<&str> = blocks
                .iter()
                .flat_map(|b| b.votes.iter().map(|v| v.source.as_str()))
                .collect();
            let n = self.sources.unwrap_or(seen.len());
            project_corpus(&blocks, n, tagset.len())?
                .iter()
                .map(|p| p.to_sentence())
                .collect()
        };
        let dev = self.dev.as_ref().map(|p| read_corpus(p, &tagset)).transpose()?;
        let test = self.test.as_ref().map(|p| read_corpus(p, &tagset)).transpose()?;
        let lexicons = self
            .lexicons
            .iter()
            .map(|(name, path)| {
                let mut lex = load_lexicon_auto(path, name, &tagset)?;
                lex.set_lowercase_fallback(self.lex_lowercase);
                Ok(lex)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(name) = self.type_constraint_lexicon() {
            let lex = lexicons.iter().find(|l| l.name() == name).expect("loaded");
            if !lex.is_tag_dictionary_for(&tagset) {
                return Err(Error::Config(format!(
                    "lexicon {name} lists non-tag properties and cannot constrain decoding"
                )));
            }
        }
        let embeddings = self.embeddings.as_ref().map(load_embeddings).transpose()?;
        Ok(Resources {
            tagset,
            pool,
            dev,
            test,
            lexicons,
            embeddings,
        })
    }

    /// Fails on the first referenced path that does not exist.
    pub fn check_paths(&self) -> Result<()> {
        let named = [
            ("train", &self.train),
            ("projection", &self.projection),
            ("dev", &self.dev),
            ("test", &self.test),
            ("embeddings", &self.embeddings),
        ];
        let missing = |p: &Path| !p.exists();
        for (key, path) in named {
            if let Some(p) = path.as_deref().filter(|p| missing(p)) {
                return Err(Error::Config(format!("{key} path {} does not exist", p.display())));
            }
        }
        for (name, p) in &self.lexicons {
            if missing(p) {
                return Err(Error::Config(format!("lexicon.{name} path {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Training sentences of one run.
    pub fn select(&self, pool: &[Sentence], mode: Selection, k: usize, sample: usize) -> Vec<Sentence> {
        let idx = match mode {
            Selection::All => (0..pool.len()).collect(),
            Selection::Top(SelectionMode::Coverage) => {
                let scores: Vec<f64> = pool.iter().map(|s| s.coverage.unwrap_or(0.0)).collect();
                top_k_indices(&scores, k)
            }
            Selection::Top(SelectionMode::Random) => random_indices(pool.len(), k, sample as u64),
        };
        idx.into_iter().map(|i| pool[i].clone()).collect()
    }

    /// Trains on the selection of `key` and evaluates on the test corpus,
    /// falling back to dev.
    pub fn run(&self, res: &Resources, key: RunKey) -> Result<RunOutcome> {
        let train_set = self.select(&res.pool, self.selection, key.k, key.sample);
        let cfg = self.train_config_for(key.seed);
        let inputs = TrainInputs {
            lexicons: &res.lexicons,
            embeddings: res.embeddings.as_ref(),
        };
        let (tagger, train_report) = train(&cfg, &res.tagset, &train_set, res.dev.as_deref(), inputs)?;
        let eval = match res.test.as_deref().or(res.dev.as_deref()) {
            Some(corpus) => {
                let pred = self.decode(&tagger, res, corpus)?;
                Some(oov_split(corpus, &pred, tagger.vocab(), &res.lexicons, res.tagset.len())?)
            }
            None => None,
        };
        Ok(RunOutcome {
            tagger,
            train_report,
            eval,
            train_size: train_set.len(),
        })
    }

    /// Tags `corpus`, applying type constraints when configured.
    pub fn decode(&self, tagger: &Tagger, res: &Resources, corpus: &[Sentence]) -> Result<Vec<Vec<TagId>>> {
        let tc = self
            .type_constraint_lexicon()
            .and_then(|n| res.lexicons.iter().find(|l| l.name() == n));
        corpus
            .iter()
            .map(|s| match tc {
                Some(dict) => tagger.tag_with_type_constraints(s, dict),
                None => tagger.tag(s),
            })
            .collect()
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(Error::Config(format!("invalid lexicon name {name:?}")));
    }
    Ok(())
}

/// Loads a lexicon as a tag dictionary when all its labels are tags, and as
/// a morphological lexicon otherwise.
pub fn load_lexicon_auto(path: &Path, name: &str, tagset: &TagSet) -> Result<Lexicon> {
    let open = crate::lexicon::load_lexicon(path, name, PropertyInventory::Open)?;
    if !open.is_empty() && open.properties().iter().all(|p| tagset.index(p).is_some()) {
        crate::lexicon::load_lexicon(path, name, PropertyInventory::Tags(tagset))
    } else {
        Ok(open)
    }
}

#[derive(Debug, Clone)]
pub struct Resources {
    pub tagset: TagSet,
    pub pool: Vec<Sentence>,
    pub dev: Option<Vec<Sentence>>,
    pub test: Option<Vec<Sentence>>,
    pub lexicons: Vec<Lexicon>,
    pub embeddings: Option<EmbeddingTable>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub tagger: Tagger,
    pub train_report: TrainReport,
    pub eval: Option<EvalReport>,
    pub train_size: usize,
}

/// A tiny model and corpus for gradient checking: 20 word rows, one embedded
/// lexicon with 4 properties of length 3, and one masked position.
pub fn toy_problem(seed: u64) -> Result<(Tagger, Vec<Sentence>)> {
    let tagset = TagSet::universal();
    let words: [&[&str]; 3] = [
        &["the", "dog", "runs", "fast", "over", "."],
        &["a", "red", "cat", "sleeps", "here", "!"],
        &["big", "birds", "sing", "loud", "songs", "fox", "jumps"],
    ];
    let mut corpus = Vec::new();
    for (i, ws) in words.iter().enumerate() {
        let tags: Vec<Option<TagId>> = (0..ws.len()).map(|j| Some((i * 5 + j) % tagset.len())).collect();
        let mut mask = vec![true; ws.len()];
        if i == 1 {
            mask[2] = false;
        }
        corpus.push(Sentence::new(ws.iter().map(|w| w.to_string()).collect(), tags, mask)?);
    }
    let entries = [
        ("dog", vec![0, 1]),
        ("cat", vec![0]),
        ("runs", vec![2]),
        ("sing", vec![2, 3]),
        ("loud", vec![1, 3]),
        ("fox", vec![0, 1, 2, 3]),
    ];
    let lex = Lexicon::from_entries(
        "toy",
        (0..4).map(|i| format!("P{i}")).collect(),
        entries.into_iter().map(|(w, p)| (w.to_string(), p)).collect(),
    )?;
    let mut cfg = TrainConfig {
        seed,
        word_dropout: 0.0,
        dims: ModelDims {
            word_dim: 8,
            char_dim: 4,
            char_hidden: 5,
            word_hidden: 6,
        },
        ..TrainConfig::default()
    };
    cfg.lexicon.dim = 3;
    cfg.lexicon.sources = vec![LexiconSource::new("toy", FeatureMode::Embedded)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = TrainInputs {
        lexicons: std::slice::from_ref(&lex),
        embeddings: None,
    };
    let tagger = Tagger::build(&cfg, &tagset, &corpus, inputs, &mut rng)?;
    Ok((tagger, corpus))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut cfg = ExperimentConfig::parse(
            "# preset\nprojection = p.txt\nlexicon.w = w.tsv\nlex_mode = embed\nk=100\nseeds=4,5\n",
        )
        .unwrap();
        assert_eq!(cfg.k, 100);
        assert_eq!(cfg.seeds, vec![4, 5]);
        assert_eq!(cfg.mode_of("w"), LexMode::Embedded);
        cfg.set("lex_mode.w", "tc").unwrap();
        assert_eq!(cfg.type_constraint_lexicon(), Some("w"));
        assert!(cfg.lexicon_sources().is_empty());
        cfg.validate().unwrap();
        let before = cfg.hash();
        cfg.set("lex_lowercase", "true").unwrap();
        assert!(cfg.lex_lowercase);
        assert_ne!(cfg.hash(), before);
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("k = x").is_err());
        assert!(ExperimentConfig::parse("lex_mode = sometimes").is_err());
    }

    #[test]
    fn hash_ignores_run_coordinates() {
        let a = ExperimentConfig::parse("projection=p\nk=10\nseeds=1\n").unwrap();
        let b = ExperimentConfig::parse("projection=p\nk=20\nseeds=2,3\nout=x\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse("projection=p\nepochs=3\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::parse("").unwrap().validate().is_err());
        assert!(ExperimentConfig::parse("train=a\nprojection=b").unwrap().validate().is_err());
        assert!(ExperimentConfig::parse("train=a\nseeds=").unwrap().validate().is_err());
        assert!(ExperimentConfig::parse("train=a\nlex_mode.x=tc").unwrap().validate().is_err());
        assert!(ExperimentConfig::parse("train=a\nlexicon.x=1\nlexicon.y=2\nlex_mode=tc")
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn toy_problem_sizes() {
        let (tagger, corpus) = toy_problem(1).unwrap();
        assert_eq!(tagger.vocab().len(), 20);
        assert_eq!(tagger.input_dim(), 8 + 10 + 12);
        assert_eq!(corpus.len(), 3);
    }
}
