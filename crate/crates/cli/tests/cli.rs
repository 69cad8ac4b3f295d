use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use distag_core::corpus::{parse_corpus_str, read_corpus, save_corpus, Sentence, TagSet};
use distag_core::eval::{multi_seed, read_ledger};
use distag_core::lexicon::{load_lexicon, PropertyInventory};

const BIN: &str = env!("CARGO_BIN_EXE_distag");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn distag")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "distag {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const TINY: [&str; 8] = [
    "--set", "word_dim=8", "--set", "char_dim=4", "--set", "char_hidden=4", "--set", "word_hidden=8",
];

fn with_tiny<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(&TINY);
    v
}

fn synth_bundle(dir: &Path) {
    ok(dir, &["synth", "--pool", "120", "--dev", "10", "--test", "30", "--out", "bench"]);
}

const FIXTURE: &str = "\
#tokens\tthe dog barks
s1\t0\t1\tDET:1
s1\t1\t0.8\tNOUN:0.9
s2\t1\t0.5\tVERB:1
s2\t2\t1\tVERB:0.6

#tokens\ta cat
s1\t0\t1\tDET:1
s2\t0\t1\tDET:1

#tokens\tbirds sing .
s1\t0\t1\tNOUN:0.5,VERB:0.5
s2\t0\t1\tVERB:0.5,NOUN:0.5
s1\t2\t1\tPUNCT:1
";

#[test]
fn project_decodes_golden_fixture() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), FIXTURE).unwrap();
    let text = ok(dir.path(), &["project", "p.txt"]);
    let got = parse_corpus_str(&text, &TagSet::universal()).unwrap();

    // Decoded by hand: NOUN wins 0.72 to 0.5; "cat" has no link; the
    // NOUN/VERB tie goes to the lower tag index.
    let want: [(&[(&str, Option<&str>)], f64); 3] = [
        (&[("the", Some("DET")), ("dog", Some("NOUN")), ("barks", Some("VERB"))], 2.0 / 3.0),
        (&[("a", Some("DET")), ("cat", None)], 0.5),
        (&[("birds", Some("NOUN")), ("sing", None), (".", Some("PUNCT"))], 0.5),
    ];
    assert_eq!(got.len(), 3);
    let ts = TagSet::universal();
    for (s, (toks, cov)) in got.iter().zip(want) {
        let pairs: Vec<(&str, Option<&str>)> = s
            .tokens
            .iter()
            .zip(&s.tags)
            .map(|(t, g)| (t.as_str(), g.map(|g| ts.name(g))))
            .collect();
        assert_eq!(pairs, toks);
        assert!((s.coverage.unwrap() - cov).abs() < 1e-12);
    }
}

#[test]
fn project_empty_input_gives_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), "").unwrap();
    assert_eq!(ok(dir.path(), &["project", "p.txt"]), "");
}

#[test]
fn project_malformed_block_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), "#tokens\ta b\ns1\t0\t1\tNOUN:1\ns1\t7\t1\tNOUN:1\n").unwrap();
    let out = run(dir.path(), &["project", "p.txt"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

fn scored_corpus(dir: &Path) -> Vec<Sentence> {
    let covs = [0.2, 0.9, 0.5, 0.9, 0.1, 0.7, 0.5];
    let corpus: Vec<Sentence> = covs
        .iter()
        .enumerate()
        .map(|(i, &c)| Sentence::from_words(&[&format!("w{i}")], &[0]).unwrap().with_coverage(c))
        .collect();
    save_corpus(dir.join("c.tsv"), &corpus, &TagSet::universal()).unwrap();
    corpus
}

#[test]
fn select_coverage_matches_sort_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = scored_corpus(dir.path());
    let text = ok(dir.path(), &["select", "c.tsv", "--mode", "coverage", "--k", "4"]);
    let got = parse_corpus_str(&text, &TagSet::universal()).unwrap();

    let mut oracle = corpus.clone();
    oracle.sort_by(|a, b| b.coverage.partial_cmp(&a.coverage).unwrap());
    oracle.truncate(4);
    assert_eq!(got, oracle);

    assert_eq!(ok(dir.path(), &["select", "c.tsv", "--k", "0"]), "");
}

#[test]
fn select_random_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    scored_corpus(dir.path());
    let args = ["select", "c.tsv", "--mode", "random", "--k", "3", "--seed", "9"];
    let a = ok(dir.path(), &args);
    assert_eq!(a, ok(dir.path(), &args));
    assert_eq!(parse_corpus_str(&a, &TagSet::universal()).unwrap().len(), 3);
    let out = run(dir.path(), &["select", "c.tsv", "--mode", "sideways"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_repeats_bit_identically_and_tags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_bundle(d);
    let train = |out: &str| {
        ok(
            d,
            &with_tiny(&[
                "train", "--preset", "embed_w", "--projection", "bench/lang00/projection.txt",
                "--test", "bench/lang00/test.tsv", "--lexicon", "wiktionary=bench/lang00/wiktionary.tsv",
                "--k", "60", "--seeds", "4", "--epochs", "2", "--out", out,
            ]),
        )
    };
    let a = train("a");
    let b = train("b");
    let digest = |s: &str| s.split("sha256=").nth(1).unwrap().trim().to_string();
    assert_eq!(digest(&a), digest(&b));
    assert_eq!(
        fs::read(d.join("a/model.seed4.bin")).unwrap(),
        fs::read(d.join("b/model.seed4.bin")).unwrap()
    );
    let ledger = read_ledger(fs::read_to_string(d.join("a/ledger.tsv")).unwrap().as_bytes()).unwrap();
    assert!(ledger.iter().any(|r| r.metric == "accuracy" && r.key.seed == 4 && r.key.k == 60));

    let ts = TagSet::universal();
    let test = read_corpus(d.join("bench/lang00/test.tsv"), &ts).unwrap();
    let text = ok(d, &["tag", "--model", "a/model.seed4.bin", "--input", "bench/lang00/test.tsv"]);
    let tagged = parse_corpus_str(&text, &ts).unwrap();
    assert_eq!(tagged.len(), test.len());
    for (t, g) in tagged.iter().zip(&test) {
        assert_eq!(t.tokens, g.tokens);
        assert!(t.tags.iter().all(Option::is_some));
    }

    let text = ok(
        d,
        &[
            "tag", "--model", "a/model.seed4.bin", "--input", "bench/lang00/test.tsv",
            "--type-constraints", "bench/lang00/wiktionary.tsv",
        ],
    );
    let dict = load_lexicon(d.join("bench/lang00/wiktionary.tsv"), "w", PropertyInventory::Tags(&ts)).unwrap();
    let mut constrained = 0;
    for s in parse_corpus_str(&text, &ts).unwrap() {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            if let Some(allowed) = dict.props(tok) {
                constrained += 1;
                assert!(allowed.contains(&tag.unwrap()), "{tok}");
            }
        }
    }
    assert!(constrained > 0);
}

#[test]
fn tag_accepts_untagged_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_bundle(d);
    ok(
        d,
        &with_tiny(&["train", "--train", "bench/lang00/dev.tsv", "--seeds", "1", "--epochs", "1", "--out", "m"]),
    );
    fs::write(d.join("raw.tsv"), "some\nnew\nwords\n\n").unwrap();
    let text = ok(d, &["tag", "--model", "m/model.seed1.bin", "--input", "raw.tsv"]);
    let got = parse_corpus_str(&text, &TagSet::universal()).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].num_trainable(), 3);
}

#[test]
fn train_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_bundle(d);
    let out = run(
        d,
        &["train", "--train", "bench/lang00/dev.tsv", "--embeddings", "missing.vec", "--out", "m"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("embeddings"));

    let out = run(d, &["train", "--train", "bench/lang00/dev.tsv", "--lex-mode", "w=bogus", "--out", "m"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(d, &["train", "--preset", "tc_w", "--train", "bench/lang00/dev.tsv", "--out", "m"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn diverging_training_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_bundle(d);
    let out = run(
        d,
        &with_tiny(&[
            "train", "--train", "bench/lang00/dev.tsv", "--seeds", "1", "--epochs", "2",
            "--set", "learning_rate=1e300", "--out", "m",
        ]),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_reports_buckets_and_rejects_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("train.tsv"), "the\tDET\ndog\tNOUN\n\n").unwrap();
    fs::write(d.join("gold.tsv"), "the\tDET\ncat\tNOUN\nsat\tVERB\n\n").unwrap();
    fs::write(d.join("pred.tsv"), "the\tDET\ncat\tNOUN\nsat\tNOUN\n\n").unwrap();
    fs::write(d.join("lex.tsv"), "cat\tNOUN\n").unwrap();
    let text = ok(
        d,
        &["eval", "--gold", "gold.tsv", "--pred", "pred.tsv", "--train", "train.tsv", "--lexicon", "w=lex.tsv"],
    );
    assert!(text.starts_with("# lexicon coverage is measured on the evaluation corpus"));
    let field = |bucket: &str| -> Vec<String> {
        text.lines()
            .find(|l| l.starts_with(&format!("{bucket}\t")))
            .unwrap()
            .split('\t')
            .skip(1)
            .map(str::to_string)
            .collect()
    };
    // 2 of 3 right; cat and sat are OOV; only cat is in the lexicon.
    assert_eq!(field("all")[..2], ["2", "3"]);
    assert_eq!(field("oov")[..2], ["1", "2"]);
    assert_eq!(field("oov_in_lexicon"), ["1", "1", "1"]);
    assert_eq!(field("oov_not_in_lexicon"), ["0", "1", "0"]);
    assert_eq!(field("tag:ADJ"), ["0", "0", "NA"]);
    assert!(text.contains(&format!("lexicon_token_coverage={}", 1.0 / 3.0)));

    fs::write(d.join("short.tsv"), "the\tDET\n\n").unwrap();
    let out = run(d, &["eval", "--gold", "gold.tsv", "--pred", "short.tsv", "--train", "train.tsv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn curve_counts_resumes_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_bundle(d);
    let args = with_tiny(&[
        "curve", "--projection", "bench/lang00/projection.txt", "--test", "bench/lang00/test.tsv",
        "--mode", "random", "--sizes", "20,40", "--samples", "2", "--seeds", "1,2", "--epochs", "1",
        "--jobs", "2", "--out", "sweep",
    ]);
    let first = ok(d, &args);
    let ledger_text = fs::read_to_string(d.join("sweep/ledger.tsv")).unwrap();
    let rows = read_ledger(ledger_text.as_bytes()).unwrap();
    let acc: Vec<_> = rows.iter().filter(|r| r.metric == "accuracy").collect();
    assert_eq!(acc.len(), 2 * 2 * 2);

    // A rerun trains nothing and reproduces the summary.
    let second = ok(d, &args);
    assert_eq!(first, second);
    assert_eq!(fs::read_to_string(d.join("sweep/ledger.tsv")).unwrap(), ledger_text);

    let curve = fs::read_to_string(d.join("sweep/curve.tsv")).unwrap();
    assert_eq!(curve, first);
    for line in curve.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let k: usize = f[0].parse().unwrap();
        let mut values: Vec<_> = acc.iter().filter(|r| r.key.k == k).map(|r| (r.key, r.value)).collect();
        values.sort_by_key(|v| v.0);
        let values: Vec<f64> = values.into_iter().map(|v| v.1).collect();
        let (mean, std) = multi_seed(&values).unwrap();
        assert_eq!(f[1].parse::<f64>().unwrap(), mean);
        assert_eq!(f[2].parse::<f64>().unwrap(), std);
        assert_eq!(f[3], "4");
    }

    // Coverage mode collapses samples.
    let mut cov = args.clone();
    let m = cov.iter().position(|a| *a == "random").unwrap();
    cov[m] = "coverage";
    let o = cov.iter().position(|a| *a == "sweep").unwrap();
    cov[o] = "sweep_cov";
    let text = ok(d, &cov);
    assert!(text.lines().skip(1).all(|l| l.ends_with("\t2")), "{text}");
}

#[test]
fn check_grad_passes_and_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["check-grad"]);
    assert!(text.contains("lex_emb.0"));
    let out = run(dir.path(), &["check-grad", "--corrupt-gradient"]);
    assert!(!out.status.success());
    for eps in ["--eps=0", "--eps=-1", "--eps=0.5", "--eps=x"] {
        assert_eq!(run(dir.path(), &["check-grad", eps]).status.code(), Some(1), "{eps}");
    }
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--pool", "50", "--dev", "5", "--test", "5", "--languages", "2", "--out", "a"]);
    ok(d, &["synth", "--pool", "50", "--dev", "5", "--test", "5", "--languages", "2", "--out", "b"]);
    for lang in ["lang00", "lang01"] {
        for entry in fs::read_dir(d.join("a").join(lang)).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                fs::read(d.join("a").join(lang).join(&name)).unwrap(),
                fs::read(d.join("b").join(lang).join(&name)).unwrap()
            );
        }
    }
    let out = run(d, &["synth", "--lexicon-fraction", "1.5", "--out", "c"]);
    assert_eq!(out.status.code(), Some(1));
}
