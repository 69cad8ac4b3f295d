//! Experiment flags shared by `train` and `curve`.
//!
//! Settings are layered: defaults, then the preset, then the config file,
//! then `--set` overrides, then the dedicated flags.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use distag_core::experiment::ExperimentConfig;

const PRESETS: [(&str, &str); 5] = [
    ("5k", include_str!("../presets/5k.conf")),
    ("tc_w", include_str!("../presets/tc_w.conf")),
    ("nhot_w", include_str!("../presets/nhot_w.conf")),
    ("embed_w", include_str!("../presets/embed_w.conf")),
    ("embed_all", include_str!("../presets/embed_all.conf")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[derive(Args, Debug, Default)]
pub struct ExperimentArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Shipped preset: 5k, tc_w, nhot_w, embed_w or embed_all.
    #[arg(long)]
    pub preset: Option<String>,

    /// Tagged training pool.
    #[arg(long)]
    pub train: Option<PathBuf>,

    /// Projection file decoded into the training pool.
    #[arg(long)]
    pub projection: Option<PathBuf>,

    #[arg(long)]
    pub sources: Option<usize>,

    #[arg(long)]
    pub dev: Option<PathBuf>,

    #[arg(long)]
    pub test: Option<PathBuf>,

    /// Pre-trained word vectors.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    /// Lexicon as `name=path`; repeatable.
    #[arg(long = "lexicon", value_name = "NAME=PATH")]
    pub lexicons: Vec<String>,

    /// none, tc, nhot or embed; `name=mode` sets one lexicon.
    #[arg(long = "lex-mode", value_name = "MODE")]
    pub lex_modes: Vec<String>,

    /// Length of each embedded lexicon property vector.
    #[arg(long)]
    pub lex_dim: Option<usize>,

    /// Instance selection: coverage, random or all.
    #[arg(long)]
    pub mode: Option<String>,

    #[arg(long)]
    pub k: Option<usize>,

    /// Comma-separated seeds.
    #[arg(long)]
    pub seeds: Option<String>,

    #[arg(long)]
    pub epochs: Option<usize>,

    #[arg(long)]
    pub word_dropout: Option<f64>,

    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn split_pair<'a>(s: &'a str, what: &str) -> Result<(&'a str, &'a str)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => bail!(distag_core::Error::Config(format!("expected {what}, got {s:?}"))),
    }
}

impl ExperimentArgs {
    pub fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(name) = &self.preset {
            let text = preset(name).ok_or_else(|| {
                distag_core::Error::Config(format!("unknown preset {name:?}"))
            })?;
            cfg.apply(text).with_context(|| format!("preset {name}"))?;
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| distag_core::Error::Config(format!("{}: {e}", path.display())))?;
            cfg.apply(&text).with_context(|| format!("config {}", path.display()))?;
        }
        for o in &self.overrides {
            let (k, v) = split_pair(o, "KEY=VALUE")?;
            cfg.set(k, v)?;
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut flags: Vec<(String, String)> = Vec::new();
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k.to_string(), v));
            }
        };
        flag("train", path(&self.train));
        flag("projection", path(&self.projection));
        flag("sources", self.sources.map(|v| v.to_string()));
        flag("dev", path(&self.dev));
        flag("test", path(&self.test));
        flag("embeddings", path(&self.embeddings));
        flag("lex_dim", self.lex_dim.map(|v| v.to_string()));
        flag("selection", self.mode.clone());
        flag("k", self.k.map(|v| v.to_string()));
        flag("seeds", self.seeds.clone());
        flag("epochs", self.epochs.map(|v| v.to_string()));
        flag("word_dropout", self.word_dropout.map(|v| v.to_string()));
        flag("out", path(&self.out));
        for l in &self.lexicons {
            let (name, p) = split_pair(l, "NAME=PATH")?;
            flags.push((format!("lexicon.{name}"), p.to_string()));
        }
        for m in &self.lex_modes {
            match m.split_once('=') {
                Some((name, mode)) => flags.push((format!("lex_mode.{}", name.trim()), mode.trim().to_string())),
                None => flags.push(("lex_mode".into(), m.clone())),
            }
        }
        for (k, v) in flags {
            cfg.set(&k, &v).with_context(|| format!("--{}", k.replace('_', "-")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
