use distag_core::corpus::{build_vocab, corpus_to_string, parse_corpus_str, Sentence, TagSet, UNK_INDEX};
use distag_core::eval::{multi_seed, pearson};
use distag_core::lexicon::{n_hot, Lexicon};
use distag_core::projection::{
    project_sentence, random_indices, top_k_indices, vote_token, AlignedVote, SourceVote,
};
use distag_core::tagger::constrained_argmax;
use proptest::prelude::*;

fn token() -> impl Strategy<Value = String> {
    "[a-z0-9.,!?]{1,6}"
}

fn sentence() -> impl Strategy<Value = Sentence> {
    prop::collection::vec((token(), prop::option::weighted(0.8, 0usize..12)), 1..10).prop_flat_map(
        |pairs| {
            let (tokens, tags): (Vec<String>, Vec<Option<usize>>) = pairs.into_iter().unzip();
            prop::option::of(0.0f64..=1.0).prop_map(move |cov| {
                let mask = tags.iter().map(Option::is_some).collect();
                let s = Sentence::new(tokens.clone(), tags.clone(), mask).unwrap();
                match cov {
                    Some(c) => s.with_coverage(c),
                    None => s,
                }
            })
        },
    )
}

fn vote() -> impl Strategy<Value = SourceVote> {
    // Coarse grids make exact score ties common.
    (0u8..=4, 0usize..12, 1u8..=4).prop_map(|(a, t, c)| SourceVote::single(t, a as f64 / 4.0, c as f64 / 4.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn corpus_round_trip(corpus in prop::collection::vec(sentence(), 0..8)) {
        let ts = TagSet::universal();
        let text = corpus_to_string(&corpus, &ts).unwrap();
        let back = parse_corpus_str(&text, &ts).unwrap();
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn vocab_is_a_bijection(corpus in prop::collection::vec(sentence(), 1..8)) {
        let v = build_vocab(&corpus, 1);
        let total: usize = corpus.iter().map(Sentence::len).sum();
        let freq_sum: usize = (1..v.len()).map(|i| v.freq_of(i)).sum();
        prop_assert_eq!(freq_sum, total);
        for (i, w) in v.words().enumerate() {
            prop_assert_eq!(v.get(w), i + 1);
            prop_assert_eq!(v.word(i + 1), Some(w));
        }
        prop_assert_eq!(v.word(UNK_INDEX), None);
    }

    #[test]
    fn vote_matches_enumeration(votes in prop::collection::vec(vote(), 0..21)) {
        let got = vote_token(&votes, 12).unwrap();
        let mut best: Option<(usize, f64)> = None;
        let mut mass = 0.0;
        for t in 0..12 {
            let score: f64 = votes
                .iter()
                .flat_map(|v| v.tags.iter().map(move |&(tag, c)| (tag, v.alignment * c)))
                .filter(|&(tag, _)| tag == t)
                .map(|(_, s)| s)
                .sum();
            mass += score;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((t, score));
            }
        }
        let want = if mass > 0.0 { best } else { None };
        prop_assert_eq!(got.map(|g| g.0), want.map(|w| w.0));
    }

    #[test]
    fn vote_winner_is_scale_invariant(votes in prop::collection::vec(vote(), 1..21)) {
        let halved: Vec<SourceVote> = votes
            .iter()
            .map(|v| SourceVote { alignment: v.alignment / 2.0, ..v.clone() })
            .collect();
        prop_assert_eq!(
            vote_token(&votes, 12).unwrap().map(|v| v.0),
            vote_token(&halved, 12).unwrap().map(|v| v.0)
        );
    }

    #[test]
    fn coverage_is_a_fraction(
        n in 1usize..12,
        links in prop::collection::vec((0usize..5, 0usize..12, vote()), 0..40),
    ) {
        let tokens: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let votes: Vec<AlignedVote> = links
            .into_iter()
            .filter(|l| l.1 < n)
            .map(|(s, position, vote)| AlignedVote { source: format!("s{s}"), position, vote })
            .collect();
        let p = project_sentence(&tokens, &votes, 5, 12).unwrap();
        prop_assert!((0.0..=1.0).contains(&p.mean_coverage));
        for (_, c) in &p.source_coverage {
            prop_assert!((0.0..=1.0).contains(c));
        }
        // Uncovered exactly when no mass was cast.
        for (t, m) in p.tags.iter().zip(&p.vote_mass) {
            prop_assert_eq!(t.is_none(), *m == 0.0);
        }
    }

    #[test]
    fn top_k_is_sorted_prefix(scores in prop::collection::vec(0u8..10, 0..60), k1 in 0usize..70, k2 in 0usize..70) {
        let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 / 10.0).collect();
        let (a, b) = (k1.min(k2), k1.max(k2));
        let small = top_k_indices(&scores, a);
        let large = top_k_indices(&scores, b);
        prop_assert_eq!(&large[..small.len()], &small[..]);
        prop_assert_eq!(large.len(), b.min(scores.len()));
        for w in large.windows(2) {
            prop_assert!(scores[w[0]] > scores[w[1]] || (scores[w[0]] == scores[w[1]] && w[0] < w[1]));
        }
    }

    #[test]
    fn pearson_is_affine_invariant(
        pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        if let Ok(r) = pearson(&xs, &ys) {
            let xs2: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let r2 = pearson(&xs2, &ys).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn multi_seed_mean_within_range(xs in prop::collection::vec(0.0f64..100.0, 1..10)) {
        let (mean, std) = multi_seed(&xs).unwrap();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(mean >= lo - 1e-9 && mean <= hi + 1e-9);
        prop_assert!(std >= 0.0);
        let mut rev = xs.clone();
        rev.reverse();
        let (m2, s2) = multi_seed(&rev).unwrap();
        prop_assert!((m2 - mean).abs() < 1e-9 && (s2 - std).abs() < 1e-9);
    }

    #[test]
    fn constrained_decoding_is_sound(
        logits in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 12), 1..20),
        dict_tags in prop::collection::vec(prop::collection::btree_set(0usize..12, 1..4), 20),
    ) {
        let ts = TagSet::universal();
        let tokens: Vec<String> = (0..logits.len()).map(|i| format!("w{i}")).collect();
        let entries = tokens
            .iter()
            .zip(&dict_tags)
            .step_by(2)
            .map(|(w, t)| (w.clone(), t.iter().copied().collect()))
            .collect();
        let dict = Lexicon::from_entries("w", ts.names().to_vec(), entries).unwrap();
        let tags = constrained_argmax(&logits, &tokens, &dict);
        for (i, (tok, tag)) in tokens.iter().zip(&tags).enumerate() {
            match dict.props(tok) {
                Some(allowed) => prop_assert!(allowed.contains(tag)),
                None => prop_assert_eq!(*tag, distag_core::tagger::argmax(&logits[i])),
            }
            let nh = n_hot(&dict, tok);
            prop_assert_eq!(nh.iter().sum::<f64>() as usize, dict.props(tok).map_or(0, |p| p.len()));
        }
    }
}

#[test]
fn random_selection_is_uniform() {
    let (n, k, draws) = (100, 25, 20_000);
    let mut counts = vec![0usize; n];
    for seed in 0..draws {
        let idx = random_indices(n, k, seed);
        assert_eq!(idx.len(), k);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        for i in idx {
            counts[i] += 1;
        }
    }
    for c in counts {
        let f = c as f64 / draws as f64;
        assert!((f - 0.25).abs() < 0.02, "{f}");
    }
    assert_eq!(random_indices(10, 3, 5), random_indices(10, 3, 5));
    assert!(random_indices(10, 0, 1).is_empty());
    assert_eq!(random_indices(3, 10, 1), vec![0, 1, 2]);
}
