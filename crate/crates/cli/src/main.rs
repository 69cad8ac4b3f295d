use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::ExperimentArgs;

/// Distant-supervision part-of-speech tagging.
#[derive(Parser, Debug)]
#[command(name = "distag", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decode a projection file into a coverage-annotated corpus.
    Project(ProjectArgs),
    /// Select training instances from a projected corpus.
    Select(SelectArgs),
    /// Train one tagger per seed and record the runs in the ledger.
    Train(ExperimentArgs),
    /// Tag a corpus with a trained model.
    Tag(TagArgs),
    /// Score predicted tags against a gold corpus.
    Eval(EvalArgs),
    /// Learning-curve sweep over training-set sizes.
    Curve(CurveArgs),
    /// Generate a synthetic benchmark.
    Synth(SynthArgs),
    /// Compare analytic and finite-difference gradients on a toy model.
    CheckGrad(CheckGradArgs),
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// Projection file.
    input: PathBuf,

    /// Number of projection sources; defaults to the sources seen.
    #[arg(long)]
    sources: Option<usize>,

    /// Output corpus; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    /// Coverage-annotated corpus.
    input: PathBuf,

    /// Selection mode: coverage or random.
    #[arg(long, default_value = "coverage")]
    mode: String,

    #[arg(long, default_value_t = 5000)]
    k: usize,

    /// Seed of the random draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TagArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,

    /// Corpus to tag; existing tags are ignored.
    #[arg(long)]
    input: PathBuf,

    /// Tag dictionary restricting each listed word to its tags.
    #[arg(long)]
    type_constraints: Option<PathBuf>,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,

    #[arg(long)]
    pred: PathBuf,

    /// Model whose vocabulary defines OOV tokens.
    #[arg(long, conflicts_with = "train")]
    model: Option<PathBuf>,

    /// Training corpus whose vocabulary defines OOV tokens.
    #[arg(long)]
    train: Option<PathBuf>,

    /// Lexicon for coverage and OOV buckets, as `name=path`.
    #[arg(long = "lexicon", value_name = "NAME=PATH")]
    lexicons: Vec<String>,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,

    /// Training-set sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,

    /// Random draws per size (random mode only).
    #[arg(long)]
    samples: Option<usize>,

    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,

    #[arg(long, default_value_t = 1)]
    languages: usize,

    #[arg(long, default_value_t = 3000)]
    pool: usize,

    #[arg(long, default_value_t = 200)]
    dev: usize,

    #[arg(long, default_value_t = 500)]
    test: usize,

    #[arg(long, default_value_t = 21)]
    sources: usize,

    /// Fraction of word types listed in each lexicon.
    #[arg(long, default_value_t = 0.4)]
    lexicon_fraction: f64,

    /// Fraction of word types with a pre-trained vector.
    #[arg(long, default_value_t = 0.9)]
    embedding_fraction: f64,

    #[arg(long, default_value_t = 64)]
    embedding_dim: usize,

    /// Vote correctness at zero coverage.
    #[arg(long, default_value_t = 0.6)]
    vote_base: f64,

    /// Added vote correctness per unit of coverage.
    #[arg(long, default_value_t = 0.35)]
    vote_gain: f64,

    /// Output directory; one subdirectory per language.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CheckGradArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,

    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,

    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,

    /// Perturb the analytic gradient; the check must then fail.
    #[arg(long)]
    corrupt_gradient: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<distag_core::Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Project(a) => commands::project(a),
        Command::Select(a) => commands::select(a),
        Command::Train(a) => commands::train(a),
        Command::Tag(a) => commands::tag(a),
        Command::Eval(a) => commands::eval(a),
        Command::Curve(a) => commands::curve(a),
        Command::Synth(a) => commands::synth(a),
        Command::CheckGrad(a) => commands::check_grad(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
