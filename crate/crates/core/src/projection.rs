//! Multi-source annotation projection: weighted majority voting over aligned
//! source tags, sentence coverage scoring, and training-instance selection.
//!
//! Input file, one block per target sentence:
//!
//! ```text
//! #tokens<TAB>t1 t2 t3
//! src<TAB>j<TAB>a<TAB>TAG:conf[,TAG:conf...]
//! ...
//! <blank line>
//! ```
//!
//! Each vote line says that source `src` aligns to target position `j`
//! (0-based) with alignment probability `a` and carries the source tagger's
//! confidence distribution.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Sentence, TagId, TagSet};
use crate::error::{Error, Result};

/// Default number of selected training instances.
pub const DEFAULT_SELECTION_SIZE: usize = 5000;

const DIST_TOLERANCE: f64 = 1e-9;

/// One source's vote on one target token.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceVote {
    /// Word alignment probability in `[0, 1]`.
    pub alignment: f64,
    /// `(tag, confidence)` pairs: either one pair or a distribution summing to 1.
    pub tags: Vec<(TagId, f64)>,
}

impl SourceVote {
    pub fn single(tag: TagId, alignment: f64, confidence: f64) -> Self {
        SourceVote {
            alignment,
            tags: vec![(tag, confidence)],
        }
    }

    pub fn validate(&self, num_tags: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alignment) {
            return Err(Error::InvalidInput(format!(
                "alignment probability {} outside [0, 1]",
                self.alignment
            )));
        }
        if self.tags.is_empty() {
            return Err(Error::InvalidInput("vote without tags".into()));
        }
        for &(t, c) in &self.tags {
            if t >= num_tags {
                return Err(Error::InvalidInput(format!("tag index {t} out of range")));
            }
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidInput(format!("confidence {c} outside [0, 1]")));
            }
        }
        if self.tags.len() > 1 {
            let sum: f64 = self.tags.iter().map(|&(_, c)| c).sum();
            if (sum - 1.0).abs() > DIST_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "confidence distribution sums to {sum}"
                )));
            }
        }
        Ok(())
    }
}

/// Scores every tag by the sum of `alignment * confidence` over votes and
/// returns the best tag with its score; `None` when the total mass is zero.
/// Ties go to the lowest tag index.
pub fn vote_token(votes: &[SourceVote], num_tags: usize) -> Result<Option<(TagId, f64)>> {
    let mut scores = vec![0.0; num_tags];
    let mut mass = 0.0;
    for v in votes {
        v.validate(num_tags)?;
        for &(t, c) in &v.tags {
            let s = v.alignment * c;
            scores[t] += s;
            mass += s;
        }
    }
    if mass <= 0.0 {
        return Ok(None);
    }
    let mut best = 0;
    for t in 1..num_tags {
        if scores[t] > scores[best] {
            best = t;
        }
    }
    Ok(Some((best, scores[best])))
}

/// Arithmetic mean of per-source coverages.
pub fn mean_coverage(coverages: &[f64]) -> Result<f64> {
    if coverages.is_empty() {
        return Err(Error::InvalidInput("mean coverage over zero sources".into()));
    }
    Ok(coverages.iter().sum::<f64>() / coverages.len() as f64)
}

/// A vote attached to a target position.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedVote {
    pub source: String,
    pub position: usize,
    pub vote: SourceVote,
}

/// Target tokens with the votes cast on them, as read from a projection file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBlock {
    pub tokens: Vec<String>,
    pub votes: Vec<AlignedVote>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSentence {
    pub tokens: Vec<String>,
    /// Voted tag, `None` for uncovered tokens.
    pub tags: Vec<Option<TagId>>,
    /// Total `alignment * confidence` mass per token.
    pub vote_mass: Vec<f64>,
    /// Fraction of tokens linked by each source that cast a vote, in order
    /// of first appearance.
    pub source_coverage: Vec<(String, f64)>,
    /// Mean over the configured source count; silent sources count as 0.
    pub mean_coverage: f64,
}

impl ProjectedSentence {
    /// Training sentence: uncovered tokens stay as context with the loss masked.
    pub fn to_sentence(&self) -> Sentence {
        let mask = self.tags.iter().map(Option::is_some).collect();
        Sentence::new(self.tokens.clone(), self.tags.clone(), mask)
            .expect("projected fields are aligned")
            .with_coverage(self.mean_coverage)
    }
}

/// Decodes one sentence by voting at every position.
pub fn project_sentence(
    tokens: &[String],
    votes: &[AlignedVote],
    num_sources: usize,
    num_tags: usize,
) -> Result<ProjectedSentence> {
    let n = tokens.len();
    let mut per_position: Vec<Vec<SourceVote>> = vec![Vec::new(); n];
    let mut sources: Vec<String> = Vec::new();
    let mut source_idx: HashMap<&str, usize> = HashMap::new();
    let mut linked: Vec<Vec<bool>> = Vec::new();
    for v in votes {
        if v.position >= n {
            return Err(Error::InvalidInput(format!(
                "vote on position {} of a {n}-token sentence",
                v.position
            )));
        }
        let s = *source_idx.entry(v.source.as_str()).or_insert_with(|| {
            sources.push(v.source.clone());
            linked.push(vec![false; n]);
            sources.len() - 1
        });
        linked[s][v.position] = true;
        per_position[v.position].push(v.vote.clone());
    }
    if sources.len() > num_sources {
        return Err(Error::InvalidInput(format!(
            "{} sources voted but only {num_sources} are configured",
            sources.len()
        )));
    }

    let mut tags = Vec::with_capacity(n);
    let mut vote_mass = Vec::with_capacity(n);
    for pv in &per_position {
        tags.push(vote_token(pv, num_tags)?.map(|(t, _)| t));
        vote_mass.push(pv.iter().flat_map(|v| v.tags.iter().map(move |&(_, c)| v.alignment * c)).sum());
    }
    let source_coverage: Vec<(String, f64)> = sources
        .into_iter()
        .zip(&linked)
        .map(|(s, l)| (s, l.iter().filter(|&&x| x).count() as f64 / n as f64))
        .collect();
    let mean = if num_sources == 0 {
        0.0
    } else {
        let mut covs: Vec<f64> = source_coverage.iter().map(|(_, c)| *c).collect();
        covs.resize(num_sources, 0.0);
        mean_coverage(&covs)?
    };
    Ok(ProjectedSentence {
        tokens: tokens.to_vec(),
        tags,
        vote_mass,
        source_coverage,
        mean_coverage: mean,
    })
}

/// Anything ranked by a coverage score.
pub trait CoverageScored {
    fn coverage_score(&self) -> f64;
}

impl CoverageScored for ProjectedSentence {
    fn coverage_score(&self) -> f64 {
        self.mean_coverage
    }
}

impl CoverageScored for Sentence {
    fn coverage_score(&self) -> f64 {
        self.coverage.unwrap_or(0.0)
    }
}

/// Indices of the `k` highest scores, descending; ties keep input order.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(k);
    idx
}

/// The `k` best-covered items in descending coverage order.
pub fn select_top_k<T: CoverageScored + Clone>(corpus: &[T], k: usize) -> Vec<T> {
    let scores: Vec<f64> = corpus.iter().map(CoverageScored::coverage_score).collect();
    top_k_indices(&scores, k)
        .into_iter()
        .map(|i| corpus[i].clone())
        .collect()
}

/// Uniform sample of `k` indices without replacement, in ascending order.
pub fn random_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Uniform random subset of size `k`, in corpus order.
pub fn random_select<T: Clone>(corpus: &[T], k: usize, seed: u64) -> Vec<T> {
    random_indices(corpus.len(), k, seed)
        .into_iter()
        .map(|i| corpus[i].clone())
        .collect()
}

const TOKENS_PREFIX: &str = "#tokens\t";

fn parse_vote_line(line: &str, lineno: usize, n: usize, tagset: &TagSet) -> Result<AlignedVote> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(Error::parse(lineno, "expected source<TAB>position<TAB>alignment<TAB>tags"));
    }
    let source = fields[0];
    if source.is_empty() {
        return Err(Error::parse(lineno, "empty source id"));
    }
    let position: usize = fields[1]
        .parse()
        .map_err(|_| Error::parse(lineno, format!("invalid position {:?}", fields[1])))?;
    if position >= n {
        return Err(Error::parse(lineno, format!("position {position} out of range for {n} tokens")));
    }
    let alignment: f64 = fields[2]
        .parse()
        .map_err(|_| Error::parse(lineno, format!("invalid alignment probability {:?}", fields[2])))?;
    let mut tags = Vec::new();
    for item in fields[3].split(',') {
        let (tag, conf) = item
            .rsplit_once(':')
            .ok_or_else(|| Error::parse(lineno, format!("expected TAG:conf, got {item:?}")))?;
        let t = tagset
            .index(tag)
            .ok_or_else(|| Error::parse(lineno, format!("unknown tag {tag:?}")))?;
        let c: f64 = conf
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid confidence {conf:?}")))?;
        tags.push((t, c));
    }
    let vote = SourceVote { alignment, tags };
    vote.validate(tagset.len())
        .map_err(|e| Error::parse(lineno, e.to_string()))?;
    Ok(AlignedVote {
        source: source.to_string(),
        position,
        vote,
    })
}

pub fn parse_projection<R: BufRead>(reader: R, tagset: &TagSet) -> Result<Vec<ProjectionBlock>> {
    let mut blocks = Vec::new();
    let mut current: Option<ProjectionBlock> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            blocks.extend(current.take());
            continue;
        }
        match current.as_mut() {
            None => {
                let toks = line
                    .strip_prefix(TOKENS_PREFIX)
                    .ok_or_else(|| Error::parse(lineno, "block must start with #tokens<TAB>..."))?;
                let tokens: Vec<String> = toks.split(' ').map(str::to_string).collect();
                if tokens.iter().any(String::is_empty) {
                    return Err(Error::parse(lineno, "empty token"));
                }
                current = Some(ProjectionBlock {
                    tokens,
                    votes: Vec::new(),
                });
            }
            Some(block) => {
                let v = parse_vote_line(line, lineno, block.tokens.len(), tagset)?;
                block.votes.push(v);
            }
        }
    }
    blocks.extend(current);
    Ok(blocks)
}

pub fn read_projection(path: impl AsRef<Path>, tagset: &TagSet) -> Result<Vec<ProjectionBlock>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_projection(BufReader::new(f), tagset).map_err(|e| e.in_file(path))
}

pub fn write_projection<W: Write>(mut w: W, blocks: &[ProjectionBlock], tagset: &TagSet) -> Result<()> {
    for b in blocks {
        writeln!(w, "{TOKENS_PREFIX}{}", b.tokens.join(" "))?;
        for v in &b.votes {
            let dist: Vec<String> = v
                .vote
                .tags
                .iter()
                .map(|&(t, c)| format!("{}:{c}", tagset.name(t)))
                .collect();
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                v.source,
                v.position,
                v.vote.alignment,
                dist.join(",")
            )?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Decodes every block.
pub fn project_corpus(blocks: &[ProjectionBlock], num_sources: usize, num_tags: usize) -> Result<Vec<ProjectedSentence>> {
    blocks
        .iter()
        .map(|b| project_sentence(&b.tokens, &b.votes, num_sources, num_tags))
        .collect()
}
