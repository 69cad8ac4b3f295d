use distag_core::corpus::{EmbeddingTable, Sentence, TagSet};
use distag_core::experiment::toy_problem;
use distag_core::lexicon::{merge_sources, FeatureMode, Lexicon, LexiconSource, PropertyInventory};
use distag_core::nn::{bi_encode, grad_check, softmax_xent, Objective, ParamSet};
use distag_core::tagger::{
    argmax, train, CorpusObjective, DropoutScheme, ModelDims, Tagger, TrainConfig, TrainInputs,
};
use distag_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_dims() -> ModelDims {
    ModelDims {
        word_dim: 6,
        char_dim: 3,
        char_hidden: 4,
        word_hidden: 5,
    }
}

fn corpus() -> Vec<Sentence> {
    vec![
        Sentence::from_words(&["the", "dog", "barks"], &[5, 0, 1]).unwrap(),
        Sentence::from_words(&["a", "cat", "sleeps", "."], &[5, 0, 1, 10]).unwrap(),
        Sentence::from_words(&["dogs", "run"], &[0, 1]).unwrap(),
    ]
}

fn wiktionary() -> Lexicon {
    let ts = TagSet::universal();
    Lexicon::parse(
        "dog\tNOUN;VERB\ncat\tNOUN\nrun\tVERB;NOUN\n".as_bytes(),
        "wiktionary",
        PropertyInventory::Tags(&ts),
    )
    .unwrap()
}

fn build(cfg: &TrainConfig, lexicons: &[Lexicon]) -> Tagger {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let inputs = TrainInputs {
        lexicons,
        embeddings: None,
    };
    Tagger::build(cfg, &TagSet::universal(), &corpus(), inputs, &mut rng).unwrap()
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    let (tagger, corpus) = toy_problem(7).unwrap();
    let objective = CorpusObjective {
        tagger: &tagger,
        corpus: &corpus,
    };
    let report = grad_check(&objective, &tagger.params, 1e-5).unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
    assert!(report.per_tensor.iter().any(|(n, _)| n.starts_with("lex_emb")));
}

#[test]
fn masked_positions_do_not_contribute() {
    let mut cfg = TrainConfig {
        dims: small_dims(),
        ..TrainConfig::default()
    };
    cfg.seed = 3;
    let tagger = build(&cfg, &[]);
    let mut s = Sentence::from_words(&["a", "cat", "sleeps", "."], &[5, 0, 1, 10]).unwrap();
    s.loss_mask[2] = false;
    let mut relabeled = s.clone();
    relabeled.tags[2] = Some(7);

    let base = CorpusObjective {
        tagger: &tagger,
        corpus: std::slice::from_ref(&s),
    };
    let other = CorpusObjective {
        tagger: &tagger,
        corpus: std::slice::from_ref(&relabeled),
    };
    let (l1, g1) = base.loss_and_grad(&tagger.params).unwrap();
    let (l2, g2) = other.loss_and_grad(&tagger.params).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(g1, g2);

    // Output-bias gradient oracle: mean of (softmax - onehot) over unmasked positions only.
    let logits = tagger.forward(&s).unwrap();
    let mut want = vec![0.0; 12];
    for i in [0, 1, 3] {
        let (_, d) = softmax_xent(&logits[i], s.tags[i].unwrap()).unwrap();
        for (w, v) in want.iter_mut().zip(d) {
            *w += v / 3.0;
        }
    }
    for (a, b) in g1.out_b.data().iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }

    // Central differences on the output bias agree with that oracle too.
    let eps = 1e-5;
    let mut plus = tagger.params.clone();
    let mut minus = tagger.params.clone();
    plus.out_b.data_mut()[7] += eps;
    minus.out_b.data_mut()[7] -= eps;
    let numeric = (base.loss(&plus).unwrap() - base.loss(&minus).unwrap()) / (2.0 * eps);
    assert!((numeric - want[7]).abs() < 1e-8);
}

#[test]
fn forward_equals_manual_composition() {
    let mut cfg = TrainConfig {
        dims: small_dims(),
        ..TrainConfig::default()
    };
    cfg.lexicon.dim = 2;
    cfg.lexicon.sources = vec![LexiconSource::new("wiktionary", FeatureMode::Embedded)];
    let tagger = build(&cfg, &[wiktionary()]);
    let s = Sentence::untagged(vec!["the".into(), "dog".into(), "zebra".into()]).unwrap();
    let p = &tagger.params;

    let mut xs = Vec::new();
    for tok in &s.tokens {
        let chars: Vec<Vec<f64>> = tagger
            .char_ids(tok)
            .into_iter()
            .map(|c| p.char_emb.row(c).to_vec())
            .collect();
        let states = bi_encode(&chars, &p.char_enc).unwrap();
        let h = 4;
        let mut x = p.word_emb.row(tagger.word_id(tok)).to_vec();
        x.extend_from_slice(&states[states.len() - 1][..h]);
        x.extend_from_slice(&states[0][h..]);
        x.extend(merge_sources(tagger.lexicons(), &p.lex_emb, tok).unwrap());
        xs.push(x);
    }
    let hidden = bi_encode(&xs, &p.word_enc).unwrap();
    let logits = tagger.forward(&s).unwrap();
    assert_eq!(logits.len(), 3);
    for (h, z) in hidden.iter().zip(&logits) {
        for t in 0..12 {
            let row = p.out_w.row(t);
            let want: f64 = p.out_b.data()[t] + row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
            assert!((z[t] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn input_dimensions() {
    let mut cfg = TrainConfig::default();
    assert_eq!(build(&cfg, &[]).input_dim(), 164);
    cfg.lexicon.sources = vec![LexiconSource::new("wiktionary", FeatureMode::Embedded)];
    let t = build(&cfg, &[wiktionary()]);
    assert_eq!(t.input_dim(), 644);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = t.build_input(&corpus()[0], 1, true, &mut rng).unwrap();
    assert_eq!(x.len(), 644);
    assert!(t.build_input(&corpus()[0], 3, false, &mut rng).is_err());
}

#[test]
fn no_dropout_means_no_replacement() {
    let cfg = TrainConfig {
        word_dropout: 0.0,
        dims: small_dims(),
        ..TrainConfig::default()
    };
    let t = build(&cfg, &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = &corpus()[1];
    let want = t.word_ids(&s.tokens);
    for _ in 0..1000 {
        assert_eq!(t.sample_word_ids(&s.tokens, &mut rng), want);
    }
}

#[test]
fn dropout_rate_matches_scheme() {
    for scheme in [DropoutScheme::FrequencyScaled, DropoutScheme::Fixed] {
        let cfg = TrainConfig {
            dropout_scheme: scheme,
            dims: small_dims(),
            ..TrainConfig::default()
        };
        let t = build(&cfg, &[]);
        let tokens: Vec<String> = vec!["dog".into(), "the".into()];
        let id = t.word_id("dog");
        let expected = match scheme {
            DropoutScheme::FrequencyScaled => 0.25 / (0.25 + 1.0),
            DropoutScheme::Fixed => 0.25,
        };
        assert_eq!(t.drop_probability(id), expected);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let dropped = (0..n)
            .filter(|_| t.sample_word_ids(&tokens, &mut rng)[0] == 0)
            .count();
        let rate = dropped as f64 / n as f64;
        assert!((rate - expected).abs() < 0.01, "{scheme:?}: {rate}");
    }
}

#[test]
fn tag_is_argmax_of_forward() {
    let cfg = TrainConfig {
        dims: small_dims(),
        ..TrainConfig::default()
    };
    let t = build(&cfg, &[]);
    for s in corpus() {
        let tags = t.tag(&s).unwrap();
        let logits = t.forward(&s).unwrap();
        assert_eq!(tags.len(), s.len());
        assert_eq!(tags, logits.iter().map(|z| argmax(z)).collect::<Vec<_>>());
        assert_eq!(t.tag(&s).unwrap(), tags);
    }
    assert!(t.tag_tokens(&[]).is_err());
}

#[test]
fn relabeling_tags_permutes_logits() {
    let cfg = TrainConfig {
        dims: small_dims(),
        ..TrainConfig::default()
    };
    let t = build(&cfg, &[]);
    let perm: Vec<usize> = (0..12).map(|i| (i * 5) % 12).collect();
    let mut permuted = t.clone();
    for (new, &old) in perm.iter().enumerate() {
        permuted.params.out_w.row_mut(new).copy_from_slice(t.params.out_w.row(old));
        permuted.params.out_b.data_mut()[new] = t.params.out_b.data()[old];
    }
    let s = &corpus()[1];
    let a = t.forward(s).unwrap();
    let b = permuted.forward(s).unwrap();
    for (za, zb) in a.iter().zip(&b) {
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(zb[new], za[old]);
        }
    }
}

#[test]
fn type_constraints_are_sound() {
    let cfg = TrainConfig {
        dims: small_dims(),
        ..TrainConfig::default()
    };
    let t = build(&cfg, &[]);
    let dict = wiktionary();
    for s in corpus() {
        let tags = t.tag_with_type_constraints(&s, &dict).unwrap();
        let free = t.tag(&s).unwrap();
        for ((tok, tag), f) in s.tokens.iter().zip(&tags).zip(&free) {
            match dict.props(tok) {
                Some(allowed) => assert!(allowed.contains(tag)),
                None => assert_eq!(tag, f),
            }
        }
    }
    let morph = Lexicon::parse("dog\tN\n".as_bytes(), "u", PropertyInventory::Open).unwrap();
    assert!(matches!(
        t.tag_with_type_constraints(&corpus()[0], &morph),
        Err(Error::Config(_))
    ));
}

#[test]
fn training_is_deterministic() {
    let cfg = TrainConfig {
        epochs: 2,
        dims: small_dims(),
        ..TrainConfig::default()
    };
    let ts = TagSet::universal();
    let run = |cfg: &TrainConfig| {
        let (m, r) = train(cfg, &ts, &corpus(), None, TrainInputs::default()).unwrap();
        assert!(r.epoch_losses.iter().all(|l| l.is_finite()));
        m.digest().unwrap()
    };
    assert_eq!(run(&cfg), run(&cfg));
    let other = TrainConfig { seed: 2, ..cfg.clone() };
    assert_ne!(run(&cfg), run(&other));
}

#[test]
fn unused_lexicons_do_not_change_the_model() {
    let cfg = TrainConfig {
        epochs: 1,
        dims: small_dims(),
        ..TrainConfig::default()
    };
    let ts = TagSet::universal();
    let (a, _) = train(&cfg, &ts, &corpus(), None, TrainInputs::default()).unwrap();
    let lexicons = [wiktionary()];
    let inputs = TrainInputs {
        lexicons: &lexicons,
        embeddings: None,
    };
    let (b, _) = train(&cfg, &ts, &corpus(), None, inputs).unwrap();
    assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
}

#[test]
fn serialization_round_trips_bit_exactly() {
    let mut cfg = TrainConfig {
        epochs: 1,
        dims: small_dims(),
        ..TrainConfig::default()
    };
    cfg.lexicon.dim = 3;
    cfg.lexicon.sources = vec![LexiconSource::new("wiktionary", FeatureMode::Embedded)];
    let lexicons = [wiktionary()];
    let inputs = TrainInputs {
        lexicons: &lexicons,
        embeddings: None,
    };
    let (m, _) = train(&cfg, &TagSet::universal(), &corpus(), None, inputs).unwrap();
    let bytes = m.to_bytes().unwrap();
    let back = Tagger::from_bytes(&bytes).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.to_bytes().unwrap(), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    m.save(&path).unwrap();
    assert_eq!(Tagger::load(&path).unwrap(), m);

    assert!(matches!(Tagger::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Tagger::from_bytes(&bad), Err(Error::Format(_))));
    let mut future = bytes.clone();
    future[8] = 99;
    assert!(matches!(Tagger::from_bytes(&future), Err(Error::Format(_))));
}

#[test]
fn training_input_errors() {
    let cfg = TrainConfig {
        epochs: 1,
        dims: small_dims(),
        ..TrainConfig::default()
    };
    let ts = TagSet::universal();
    assert!(matches!(
        train(&cfg, &ts, &[], None, TrainInputs::default()),
        Err(Error::InvalidInput(_))
    ));
    let masked = vec![Sentence::untagged(vec!["x".into()]).unwrap()];
    assert!(matches!(
        train(&cfg, &ts, &masked, None, TrainInputs::default()),
        Err(Error::InvalidInput(_))
    ));
    let table = EmbeddingTable::from_pairs(3, vec![("dog".to_string(), vec![0.0; 3])]).unwrap();
    let inputs = TrainInputs {
        lexicons: &[],
        embeddings: Some(&table),
    };
    assert!(matches!(
        train(&cfg, &ts, &corpus(), None, inputs),
        Err(Error::Config(_))
    ));
    let bad = TrainConfig {
        word_dropout: 1.0,
        ..cfg
    };
    assert!(matches!(
        train(&bad, &ts, &corpus(), None, TrainInputs::default()),
        Err(Error::Config(_))
    ));
}

#[test]
fn pretrained_vectors_initialize_word_rows() {
    let cfg = TrainConfig {
        dims: small_dims(),
        ..TrainConfig::default()
    };
    let table = EmbeddingTable::from_pairs(
        6,
        vec![
            ("dog".to_string(), vec![1.0; 6]),
            ("zebra".to_string(), vec![2.0; 6]),
        ],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs = TrainInputs {
        lexicons: &[],
        embeddings: Some(&table),
    };
    let t = Tagger::build(&cfg, &TagSet::universal(), &corpus(), inputs, &mut rng).unwrap();
    let p = &t.params;
    assert_eq!(p.word_emb.row(t.word_id("dog")), &[1.0; 6]);
    // Embedding-only words extend the table; training words without a vector get UNK.
    assert_eq!(p.word_emb.row(t.word_id("zebra")), &[2.0; 6]);
    assert_eq!(p.word_emb.row(t.word_id("cat")), table.unk());
    assert_eq!(t.word_id("unseen"), 0);
    assert_eq!(p.word_emb.shape(), &[t.vocab().len() + 1, 6]);
    assert!(p.num_params() > 0);
}
