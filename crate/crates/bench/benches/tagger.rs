use criterion::{criterion_group, criterion_main, Criterion};
use distag_core::experiment::toy_problem;
use distag_core::nn::{lstm_cell_step, LstmCellParams, Objective};
use distag_core::synth::{generate_language, SynthConfig};
use distag_core::tagger::{train, CorpusObjective, TrainConfig, TrainInputs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn lstm_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = LstmCellParams::new(164, 100, &mut rng);
    let x = vec![0.1; 164];
    let h = vec![0.0; 100];
    let cell = vec![0.0; 100];
    c.bench_function("lstm_step_164x100", |b| {
        b.iter(|| lstm_cell_step(black_box(&x), &h, &cell, &params).unwrap())
    });
}

fn sentence(c: &mut Criterion) {
    let cfg = SynthConfig {
        pool_size: 50,
        dev_size: 1,
        test_size: 1,
        ..SynthConfig::default()
    };
    let lang = generate_language(&cfg, 0).unwrap();
    let train_cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let (tagger, _) = train(&train_cfg, &lang.tagset, &lang.pool, None, TrainInputs::default()).unwrap();
    let s = lang.pool.iter().max_by_key(|s| s.len()).unwrap().clone();
    c.bench_function("tagger_forward", |b| b.iter(|| tagger.forward(black_box(&s)).unwrap()));

    let one = std::slice::from_ref(&s);
    let objective = CorpusObjective {
        tagger: &tagger,
        corpus: one,
    };
    c.bench_function("tagger_forward_backward", |b| {
        b.iter(|| objective.loss_and_grad(&tagger.params).unwrap())
    });
}

fn toy_gradient(c: &mut Criterion) {
    let (tagger, corpus) = toy_problem(7).unwrap();
    let objective = CorpusObjective {
        tagger: &tagger,
        corpus: &corpus,
    };
    c.bench_function("toy_loss_and_grad", |b| b.iter(|| objective.loss_and_grad(&tagger.params).unwrap()));
}

criterion_group!(benches, lstm_step, sentence, toy_gradient);
criterion_main!(benches);
