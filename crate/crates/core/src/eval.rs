//! Token accuracy, OOV/lexicon buckets, multi-seed aggregation, correlation
//! and learning-curve bookkeeping.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::corpus::{Sentence, TagId, TagSet, Vocab};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

fn check_shapes(gold: &[Vec<TagId>], pred: &[Vec<TagId>]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::InvalidInput(format!(
                "sentence {i}: {} gold tags but {} predicted",
                g.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

/// Fraction of tokens whose predicted tag equals the gold tag.
pub fn accuracy(gold: &[Vec<TagId>], pred: &[Vec<TagId>]) -> Result<f64> {
    check_shapes(gold, pred)?;
    let mut b = Bucket::default();
    for (g, p) in gold.iter().zip(pred) {
        for (a, b2) in g.iter().zip(p) {
            b.add(a == b2);
        }
    }
    b.accuracy()
        .ok_or_else(|| Error::Undefined("accuracy of an empty corpus".into()))
}

/// Correct/total counts of one token bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bucket {
    pub correct: usize,
    pub total: usize,
}

impl Bucket {
    pub fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
    }

    /// `None` for an empty bucket.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall: Bucket,
    /// Indexed by gold tag.
    pub per_tag: Vec<Bucket>,
    pub oov: Bucket,
    pub oov_in_lexicon: Bucket,
    pub oov_not_in_lexicon: Bucket,
    /// Evaluation tokens found in at least one lexicon, over all tokens.
    pub lexicon_token_coverage: Option<f64>,
}

impl EvalReport {
    pub fn accuracy(&self) -> Option<f64> {
        self.overall.accuracy()
    }

    /// Metric rows as `(name, value)`; undefined metrics are left out.
    pub fn metrics(&self, tagset: &TagSet) -> Vec<(String, f64)> {
        let mut rows = Vec::new();
        let mut push = |name: String, v: Option<f64>| {
            if let Some(v) = v {
                rows.push((name, v));
            }
        };
        push("accuracy".into(), self.overall.accuracy());
        push("oov_accuracy".into(), self.oov.accuracy());
        push("oov_in_lexicon_accuracy".into(), self.oov_in_lexicon.accuracy());
        push("oov_not_in_lexicon_accuracy".into(), self.oov_not_in_lexicon.accuracy());
        push("lexicon_token_coverage".into(), self.lexicon_token_coverage);
        for (t, b) in self.per_tag.iter().enumerate() {
            push(format!("tag_accuracy.{}", tagset.name(t)), b.accuracy());
        }
        rows
    }

    /// TSV with one row per bucket: `bucket, correct, total, accuracy`.
    /// Empty buckets print `NA` as their accuracy.
    pub fn write_tsv<W: Write>(&self, mut w: W, tagset: &TagSet) -> Result<()> {
        writeln!(w, "# lexicon coverage is measured on the evaluation corpus tokens")?;
        if let Some(c) = self.lexicon_token_coverage {
            writeln!(w, "# lexicon_token_coverage={c}")?;
        }
        writeln!(w, "bucket\tcorrect\ttotal\taccuracy")?;
        let mut row = |name: &str, b: &Bucket| -> std::io::Result<()> {
            let acc = b.accuracy().map_or_else(|| "NA".to_string(), |a| a.to_string());
            writeln!(w, "{name}\t{}\t{}\t{acc}", b.correct, b.total)
        };
        row("all", &self.overall)?;
        row("oov", &self.oov)?;
        row("oov_in_lexicon", &self.oov_in_lexicon)?;
        row("oov_not_in_lexicon", &self.oov_not_in_lexicon)?;
        for (t, b) in self.per_tag.iter().enumerate() {
            row(&format!("tag:{}", tagset.name(t)), b)?;
        }
        Ok(())
    }
}

/// Scores `pred` against the gold-tagged `gold` corpus.
///
/// A token is OOV when the training vocabulary lacks it and covered when at
/// least one lexicon lists it.
pub fn oov_split(
    gold: &[Sentence],
    pred: &[Vec<TagId>],
    train_vocab: &Vocab,
    lexicons: &[Lexicon],
    num_tags: usize,
) -> Result<EvalReport> {
    let gold_tags = gold
        .iter()
        .map(|s| {
            s.gold_tags()
                .ok_or_else(|| Error::InvalidInput("gold corpus has untagged tokens".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    check_shapes(&gold_tags, pred)?;
    let mut report = EvalReport {
        overall: Bucket::default(),
        per_tag: vec![Bucket::default(); num_tags],
        oov: Bucket::default(),
        oov_in_lexicon: Bucket::default(),
        oov_not_in_lexicon: Bucket::default(),
        lexicon_token_coverage: None,
    };
    let mut covered_tokens = 0usize;
    for ((s, g), p) in gold.iter().zip(&gold_tags).zip(pred) {
        for ((tok, &gt), &pt) in s.tokens.iter().zip(g).zip(p) {
            let ok = gt == pt;
            report.overall.add(ok);
            if gt >= num_tags {
                return Err(Error::InvalidInput(format!("gold tag {gt} out of range")));
            }
            report.per_tag[gt].add(ok);
            let covered = lexicons.iter().any(|l| l.contains(tok));
            covered_tokens += usize::from(covered);
            if !train_vocab.contains(tok) {
                report.oov.add(ok);
                if covered {
                    report.oov_in_lexicon.add(ok);
                } else {
                    report.oov_not_in_lexicon.add(ok);
                }
            }
        }
    }
    if report.overall.total > 0 && !lexicons.is_empty() {
        report.lexicon_token_coverage = Some(covered_tokens as f64 / report.overall.total as f64);
    }
    Ok(report)
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "pearson needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Undefined("pearson needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("pearson of a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean and sample standard deviation; the deviation is 0 for a single run.
pub fn multi_seed(results: &[f64]) -> Result<(f64, f64)> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no run results to aggregate".into()));
    }
    let n = results.len() as f64;
    let mean = results.iter().sum::<f64>() / n;
    if results.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = results.iter().map(|r| (r - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectionMode {
    Random,
    Coverage,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::Random => "random",
            SelectionMode::Coverage => "coverage",
        }
    }
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SelectionMode::Random),
            "coverage" => Ok(SelectionMode::Coverage),
            _ => Err(Error::Config(format!(
                "unknown selection mode {s:?} (expected random or coverage)"
            ))),
        }
    }
}

/// Identifies one training run of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunKey {
    pub k: usize,
    pub sample: usize,
    pub seed: u64,
}

/// Every run of a sweep in `(k, sample, seed)` order. Coverage selection is
/// deterministic, so it has a single sample per size.
pub fn plan_runs(sizes: &[usize], samples: usize, seeds: &[u64], mode: SelectionMode) -> Vec<RunKey> {
    let samples = match mode {
        SelectionMode::Random => samples,
        SelectionMode::Coverage => samples.min(1),
    };
    let mut runs = Vec::with_capacity(sizes.len() * samples * seeds.len());
    for &k in sizes {
        for sample in 0..samples {
            for &seed in seeds {
                runs.push(RunKey { k, sample, seed });
            }
        }
    }
    runs
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub runs: Vec<(RunKey, f64)>,
    pub mean: f64,
    pub std: f64,
}

/// Groups run results by size, in ascending `k`.
pub fn aggregate(results: &[(RunKey, f64)]) -> Result<Vec<CurvePoint>> {
    let mut by_k: BTreeMap<usize, Vec<(RunKey, f64)>> = BTreeMap::new();
    for &(key, v) in results {
        by_k.entry(key.k).or_default().push((key, v));
    }
    by_k.into_iter()
        .map(|(k, runs)| {
            let values: Vec<f64> = runs.iter().map(|r| r.1).collect();
            let (mean, std) = multi_seed(&values)?;
            Ok(CurvePoint { k, runs, mean, std })
        })
        .collect()
}

/// Runs `train_and_eval` for every planned run and aggregates per size.
pub fn learning_curve<F>(
    pool_size: usize,
    sizes: &[usize],
    samples: usize,
    seeds: &[u64],
    mode: SelectionMode,
    mut train_and_eval: F,
) -> Result<Vec<CurvePoint>>
where
    F: FnMut(RunKey) -> Result<f64>,
{
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    if samples == 0 {
        return Err(Error::Config("at least one sample is required".into()));
    }
    if mode == SelectionMode::Random {
        if let Some(&k) = sizes.iter().find(|&&k| k > pool_size) {
            return Err(Error::Config(format!(
                "cannot draw {k} sentences from a pool of {pool_size}"
            )));
        }
    }
    let mut results = Vec::new();
    for key in plan_runs(sizes, samples, seeds, mode) {
        let v = train_and_eval(key).map_err(|e| Error::Run {
            k: key.k,
            sample: key.sample,
            seed: key.seed,
            source: Box::new(e),
        })?;
        results.push((key, v));
    }
    aggregate(&results)
}

/// One row of the per-run results ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub config: String,
    pub key: RunKey,
    pub metric: String,
    pub value: f64,
}

pub const LEDGER_HEADER: &str = "config\tk\tsample\tseed\tmetric\tvalue";

pub fn write_ledger_row<W: Write>(mut w: W, row: &LedgerRow) -> Result<()> {
    writeln!(
        w,
        "{}\t{}\t{}\t{}\t{}\t{}",
        row.config, row.key.k, row.key.sample, row.key.seed, row.metric, row.value
    )?;
    Ok(())
}

/// Parses a ledger; a header line and blank lines are skipped.
pub fn read_ledger<R: BufRead>(reader: R) -> Result<Vec<LedgerRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line == LEDGER_HEADER {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::parse(i + 1, "expected 6 tab-separated ledger fields"));
        }
        let num = |s: &str, what: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::parse(i + 1, format!("invalid {what} {s:?}")))
        };
        rows.push(LedgerRow {
            config: f[0].to_string(),
            key: RunKey {
                k: num(f[1], "k")? as usize,
                sample: num(f[2], "sample")? as usize,
                seed: num(f[3], "seed")?,
            },
            metric: f[4].to_string(),
            value: f[5]
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("invalid value {:?}", f[5])))?,
        });
    }
    Ok(rows)
}

pub const CURVE_HEADER: &str = "k\tmean\tstd\tn_runs";

pub fn write_curve<W: Write>(mut w: W, points: &[CurvePoint]) -> Result<()> {
    writeln!(w, "{CURVE_HEADER}")?;
    for p in points {
        writeln!(w, "{}\t{}\t{}\t{}", p.k, p.mean, p.std, p.runs.len())?;
    }
    Ok(())
}
