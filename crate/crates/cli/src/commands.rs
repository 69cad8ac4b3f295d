use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use distag_core::corpus::{build_vocab, read_corpus, write_corpus, Sentence, TagSet};
use distag_core::eval::{
    aggregate, oov_split, plan_runs, read_ledger, write_curve, write_ledger_row, LedgerRow, RunKey,
    SelectionMode, LEDGER_HEADER,
};
use distag_core::experiment::{load_lexicon_auto, ExperimentConfig, Resources, RunOutcome, Selection};
use distag_core::lexicon::{load_lexicon, PropertyInventory};
use distag_core::nn::{grad_check, Objective, ParamSet};
use distag_core::projection::{project_corpus, random_indices, read_projection, top_k_indices};
use distag_core::synth::{write_benchmark, SynthConfig};
use distag_core::tagger::{CorpusObjective, TaggerParams};
use distag_core::{Error, Tagger};
use log::info;
use rayon::prelude::*;

use crate::config::split_pair;
use crate::{CheckGradArgs, CurveArgs, EvalArgs, ExperimentArgs, ProjectArgs, SelectArgs, SynthArgs, TagArgs};

pub const LEDGER_FILE: &str = "ledger.tsv";
pub const CURVE_FILE: &str = "curve.tsv";

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_ledger(path: &Path) -> Result<File> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if fresh {
        writeln!(f, "{LEDGER_HEADER}")?;
    }
    Ok(f)
}

fn read_ledger_file(path: &Path) -> Result<Vec<LedgerRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = File::open(path)?;
    read_ledger(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn outcome_rows(config: &str, key: RunKey, outcome: &RunOutcome, tagset: &TagSet) -> Vec<LedgerRow> {
    let mut metrics = vec![("train_sentences".to_string(), outcome.train_size as f64)];
    if let Some(&loss) = outcome.train_report.epoch_losses.last() {
        metrics.push(("final_train_loss".into(), loss));
    }
    if let Some(report) = &outcome.eval {
        metrics.extend(report.metrics(tagset));
    }
    metrics
        .into_iter()
        .map(|(metric, value)| LedgerRow {
            config: config.to_string(),
            key,
            metric,
            value,
        })
        .collect()
}

fn write_rows(f: &mut File, rows: &[LedgerRow]) -> Result<()> {
    let mut buf = Vec::new();
    for row in rows {
        write_ledger_row(&mut buf, row)?;
    }
    f.write_all(&buf)?;
    f.flush()?;
    Ok(())
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().ok_or_else(|| config_error("--out is required"))?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn save_config(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let path = dir.join(format!("config.{}.conf", cfg.hash()));
    fs::write(&path, cfg.canonical()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn project(a: ProjectArgs) -> Result<()> {
    let tagset = TagSet::universal();
    let blocks = read_projection(&a.input, &tagset)?;
    let seen: BTreeSet<&str> = blocks
        .iter()
        .flat_map(|b| b.votes.iter().map(|v| v.source.as_str()))
        .collect();
    let sources = a.sources.unwrap_or(seen.len());
    if sources < seen.len() {
        return Err(config_error(format!(
            "--sources {sources} is below the {} sources in the file",
            seen.len()
        )));
    }
    let projected = project_corpus(&blocks, sources, tagset.len())?;
    let corpus: Vec<Sentence> = projected.iter().map(|p| p.to_sentence()).collect();
    let tokens: usize = corpus.iter().map(Sentence::len).sum();
    let tagged: usize = corpus.iter().map(Sentence::num_trainable).sum();
    info!("projected {} sentences, {tagged} of {tokens} tokens tagged", corpus.len());
    write_corpus(output(a.out.as_deref())?, &corpus, &tagset)?;
    Ok(())
}

pub fn select(a: SelectArgs) -> Result<()> {
    let tagset = TagSet::universal();
    let mode: SelectionMode = a.mode.parse()?;
    let corpus = read_corpus(&a.input, &tagset)?;
    let idx = match mode {
        SelectionMode::Coverage => {
            if let Some(i) = corpus.iter().position(|s| s.coverage.is_none()) {
                return Err(Error::InvalidInput(format!(
                    "sentence {} has no coverage score; run project first",
                    i + 1
                ))
                .into());
            }
            let scores: Vec<f64> = corpus.iter().map(|s| s.coverage.unwrap_or(0.0)).collect();
            top_k_indices(&scores, a.k)
        }
        SelectionMode::Random => random_indices(corpus.len(), a.k, a.seed),
    };
    let selected: Vec<Sentence> = idx.into_iter().map(|i| corpus[i].clone()).collect();
    info!("selected {} of {} sentences", selected.len(), corpus.len());
    write_corpus(output(a.out.as_deref())?, &selected, &tagset)?;
    Ok(())
}

pub fn train(a: ExperimentArgs) -> Result<()> {
    let cfg = a.build()?;
    let dir = out_dir(&cfg)?;
    let res = cfg.load()?;
    let k = match cfg.selection {
        Selection::All => res.pool.len(),
        Selection::Top(_) => cfg.k,
    };
    let hash = cfg.hash();
    save_config(&cfg, &dir)?;
    let mut ledger = open_ledger(&dir.join(LEDGER_FILE))?;
    for &seed in &cfg.seeds {
        let key = RunKey { k, sample: 0, seed };
        info!("training seed {seed} on up to {k} sentences");
        let outcome = cfg.run(&res, key)?;
        let path = dir.join(format!("model.seed{seed}.bin"));
        outcome.tagger.save(&path)?;
        write_rows(&mut ledger, &outcome_rows(&hash, key, &outcome, &res.tagset))?;
        let acc = outcome
            .eval
            .as_ref()
            .and_then(|r| r.accuracy())
            .map_or_else(|| "NA".to_string(), |a| format!("{a:.4}"));
        println!("seed={seed}\taccuracy={acc}\tmodel={}\tsha256={}", path.display(), outcome.tagger.digest()?);
    }
    Ok(())
}

pub fn tag(a: TagArgs) -> Result<()> {
    let tagger = Tagger::load(&a.model)?;
    let tagset = tagger.tagset().clone();
    let corpus = read_corpus(&a.input, &tagset)?;
    let dict = a
        .type_constraints
        .as_ref()
        .map(|p| load_lexicon(p, "type_constraints", PropertyInventory::Tags(&tagset)))
        .transpose()?;
    let tags = corpus
        .par_iter()
        .map(|s| match &dict {
            Some(d) => tagger.tag_with_type_constraints(s, d),
            None => tagger.tag(s),
        })
        .collect::<distag_core::Result<Vec<_>>>()?;
    let tagged = corpus
        .into_iter()
        .zip(tags)
        .map(|(s, t)| Sentence::tagged(s.tokens, t))
        .collect::<distag_core::Result<Vec<_>>>()?;
    write_corpus(output(a.out.as_deref())?, &tagged, &tagset)?;
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let tagset = TagSet::universal();
    let gold = read_corpus(&a.gold, &tagset)?;
    let pred_corpus = read_corpus(&a.pred, &tagset)?;
    if gold.len() != pred_corpus.len() {
        return Err(Error::InvalidInput(format!(
            "gold has {} sentences, predictions have {}",
            gold.len(),
            pred_corpus.len()
        ))
        .into());
    }
    let mut pred = Vec::with_capacity(pred_corpus.len());
    for (i, (g, p)) in gold.iter().zip(&pred_corpus).enumerate() {
        if g.tokens != p.tokens {
            return Err(Error::InvalidInput(format!("sentence {} tokens differ between gold and predictions", i + 1)).into());
        }
        pred.push(
            p.gold_tags()
                .ok_or_else(|| Error::InvalidInput(format!("sentence {} has untagged predictions", i + 1)))?,
        );
    }
    let vocab = match (&a.model, &a.train) {
        (Some(m), _) => Tagger::load(m)?.vocab().clone(),
        (None, Some(t)) => build_vocab(&read_corpus(t, &tagset)?, 1),
        (None, None) => return Err(config_error("one of --model or --train is required")),
    };
    let mut lexicons = Vec::new();
    for l in &a.lexicons {
        let (name, path) = split_pair(l, "NAME=PATH")?;
        lexicons.push(load_lexicon_auto(Path::new(path), name, &tagset)?);
    }
    let report = oov_split(&gold, &pred, &vocab, &lexicons, tagset.len())?;
    let mut w = output(a.out.as_deref())?;
    report.write_tsv(&mut w, &tagset)?;
    w.flush()?;
    Ok(())
}

fn check_sizes(res: &Resources, sizes: &[usize], mode: SelectionMode) -> Result<()> {
    if mode == SelectionMode::Random {
        if let Some(k) = sizes.iter().find(|&&k| k > res.pool.len()) {
            return Err(config_error(format!(
                "cannot draw {k} sentences from a pool of {}",
                res.pool.len()
            )));
        }
    }
    Ok(())
}

pub fn curve(a: CurveArgs) -> Result<()> {
    let mut cfg = a.experiment.build()?;
    if !a.sizes.is_empty() {
        cfg.sizes = a.sizes.clone();
    }
    if let Some(s) = a.samples {
        cfg.samples = s;
    }
    if cfg.sizes.is_empty() {
        return Err(config_error("--sizes is required"));
    }
    if cfg.samples == 0 || a.jobs == 0 {
        return Err(config_error("--samples and --jobs must be at least 1"));
    }
    let mode = match cfg.selection {
        Selection::Top(m) => m,
        Selection::All => return Err(config_error("curve needs coverage or random selection")),
    };
    let dir = out_dir(&cfg)?;
    let res = cfg.load()?;
    if res.test.is_none() && res.dev.is_none() {
        return Err(config_error("curve needs a test or dev corpus"));
    }
    check_sizes(&res, &cfg.sizes, mode)?;

    let hash = cfg.hash();
    save_config(&cfg, &dir)?;
    let ledger_path = dir.join(LEDGER_FILE);
    let done: BTreeSet<RunKey> = read_ledger_file(&ledger_path)?
        .into_iter()
        .filter(|r| r.config == hash && r.metric == "accuracy")
        .map(|r| r.key)
        .collect();
    let plan = plan_runs(&cfg.sizes, cfg.samples, &cfg.seeds, mode);
    let pending: Vec<RunKey> = plan.iter().copied().filter(|k| !done.contains(k)).collect();
    info!(
        "config {hash}: {} runs planned, {} already in the ledger",
        plan.len(),
        plan.len() - pending.len()
    );

    let ledger = Mutex::new(open_ledger(&ledger_path)?);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .context("starting worker pool")?;
    pool.install(|| {
        pending.par_iter().try_for_each(|&key| -> Result<()> {
            let outcome = cfg.run(&res, key).map_err(|e| Error::Run {
                k: key.k,
                sample: key.sample,
                seed: key.seed,
                source: Box::new(e),
            })?;
            let rows = outcome_rows(&hash, key, &outcome, &res.tagset);
            let acc = rows.iter().find(|r| r.metric == "accuracy").map(|r| r.value);
            let mut f = ledger.lock().expect("ledger lock");
            write_rows(&mut f, &rows)?;
            info!("k={} sample={} seed={} accuracy={acc:?}", key.k, key.sample, key.seed);
            Ok(())
        })
    })?;

    let recorded: BTreeMap<RunKey, f64> = read_ledger_file(&ledger_path)?
        .into_iter()
        .filter(|r| r.config == hash && r.metric == "accuracy")
        .map(|r| (r.key, r.value))
        .collect();
    let results: Vec<(RunKey, f64)> = plan
        .iter()
        .filter_map(|k| recorded.get(k).map(|&v| (*k, v)))
        .collect();
    let points = aggregate(&results)?;
    let curve_path = dir.join(CURVE_FILE);
    let f = File::create(&curve_path).with_context(|| format!("creating {}", curve_path.display()))?;
    write_curve(BufWriter::new(f), &points)?;
    write_curve(io::stdout().lock(), &points)?;
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        seed: a.seed,
        languages: a.languages,
        pool_size: a.pool,
        dev_size: a.dev,
        test_size: a.test,
        num_sources: a.sources,
        lexicon_fraction: a.lexicon_fraction,
        embedding_fraction: a.embedding_fraction,
        embedding_dim: a.embedding_dim,
        vote_base: a.vote_base,
        vote_gain: a.vote_gain,
        ..SynthConfig::default()
    };
    for dir in write_benchmark(&cfg, &a.out)? {
        println!("{}", dir.display());
    }
    Ok(())
}

/// Shifts the first entry of every gradient tensor.
struct Corrupted<'a>(CorpusObjective<'a>);

impl Objective<TaggerParams> for Corrupted<'_> {
    fn loss(&self, params: &TaggerParams) -> distag_core::Result<f64> {
        self.0.loss(params)
    }

    fn loss_and_grad(&self, params: &TaggerParams) -> distag_core::Result<(f64, TaggerParams)> {
        let (loss, mut grads) = self.0.loss_and_grad(params)?;
        for t in grads.tensors_mut() {
            if let Some(g) = t.data_mut().first_mut() {
                *g += 0.01;
            }
        }
        Ok((loss, grads))
    }
}

pub fn check_grad(a: CheckGradArgs) -> Result<()> {
    if !(a.eps > 0.0 && a.eps < 1e-2) {
        return Err(config_error(format!("--eps must be in (0, 0.01), got {}", a.eps)));
    }
    let (tagger, corpus) = distag_core::experiment::toy_problem(a.seed)?;
    let objective = CorpusObjective {
        tagger: &tagger,
        corpus: &corpus,
    };
    let report = if a.corrupt_gradient {
        grad_check(&Corrupted(objective), &tagger.params, a.eps)?
    } else {
        grad_check(&objective, &tagger.params, a.eps)?
    };
    for (name, err) in &report.per_tensor {
        println!("{name}\t{err:.3e}");
    }
    println!("max_rel_error\t{:.3e}\t({} parameters)", report.max_rel_error, report.num_params);
    if report.max_rel_error >= a.tolerance {
        let worst = report.worst_tensor().map_or("", |w| w.0.as_str());
        bail!(Error::InvalidInput(format!(
            "gradient check failed: max relative error {:.3e} >= {:.0e} (worst tensor {worst})",
            report.max_rel_error, a.tolerance
        )));
    }
    Ok(())
}
