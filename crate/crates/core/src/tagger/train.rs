use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{build_vocab, EmbeddingTable, Sentence, TagSet};
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::lexicon::Lexicon;
use crate::nn::Objective;
use crate::tagger::{CharVocab, Tagger, TaggerGrads, TaggerParams, TrainConfig};

/// Resources shared by every training run.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainInputs<'a> {
    pub lexicons: &'a [Lexicon],
    pub embeddings: Option<&'a EmbeddingTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sentence loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub sentences_used: usize,
    pub dev_accuracy: Option<f64>,
}

impl Tagger {
    /// Builds an untrained model sized for `train`: vocabulary, character set
    /// and lexicon features, with word rows pre-initialized from
    /// `inputs.embeddings` when given.
    pub fn build(
        config: &TrainConfig,
        tagset: &TagSet,
        train: &[Sentence],
        inputs: TrainInputs,
        rng: &mut ChaCha8Rng,
    ) -> Result<Tagger> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::InvalidInput("training corpus is empty".into()));
        }
        let vocab = build_vocab(train, config.min_freq);
        let extra_words = match inputs.embeddings {
            Some(table) => table
                .words()
                .iter()
                .filter(|w| !vocab.contains(w))
                .cloned()
                .collect(),
            None => Vec::new(),
        };
        let chars = CharVocab::build(train.iter().flat_map(|s| s.tokens.iter().map(String::as_str)));
        let features = config.lexicon.features(inputs.lexicons)?;
        let mut tagger = Tagger::new(
            config.clone(),
            tagset.clone(),
            vocab,
            extra_words,
            chars,
            features,
            rng,
        )?;
        if let Some(table) = inputs.embeddings {
            tagger.init_from_embeddings(table)?;
        }
        Ok(tagger)
    }
}

/// Trains a tagger with per-sentence SGD and returns the final-epoch model.
///
/// Sentences without any trainable position are skipped; `dev` is used only
/// for reporting.
pub fn train(
    config: &TrainConfig,
    tagset: &TagSet,
    train: &[Sentence],
    dev: Option<&[Sentence]>,
    inputs: TrainInputs,
) -> Result<(Tagger, TrainReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tagger = Tagger::build(config, tagset, train, inputs, &mut rng)?;
    let mut order: Vec<usize> = (0..train.len())
        .filter(|&i| train[i].num_trainable() > 0)
        .collect();
    if order.is_empty() {
        return Err(Error::InvalidInput(
            "every training position is masked; nothing to learn".into(),
        ));
    }
    if order.len() < train.len() {
        log::info!(
            "skipping {} sentences without trainable positions",
            train.len() - order.len()
        );
    }

    let mut grads = TaggerGrads::new(&tagger.params);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let s = &train[i];
            let ids = tagger.sample_word_ids(&s.tokens, &mut rng);
            let loss = tagger
                .sentence_loss_and_grad(&tagger.params, s, ids, 1.0, &mut grads)?
                .expect("sentence has trainable positions");
            let norm = grads.sum_squares();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::Numerical(format!(
                    "epoch {}: loss {loss}, squared gradient norm {norm}",
                    epoch + 1
                )));
            }
            grads.apply(&mut tagger.params, config.learning_rate);
            total += loss;
        }
        let mean = total / order.len() as f64;
        log::debug!("epoch {}: mean loss {mean:.5}", epoch + 1);
        epoch_losses.push(mean);
    }

    let dev_accuracy = match dev {
        Some(dev) if !dev.is_empty() => Some(tagged_accuracy(&tagger, dev)?),
        _ => None,
    };
    Ok((
        tagger,
        TrainReport {
            epoch_losses,
            sentences_used: order.len(),
            dev_accuracy,
        },
    ))
}

/// Token accuracy of `tagger` on the gold-tagged sentences of `corpus`.
pub fn tagged_accuracy(tagger: &Tagger, corpus: &[Sentence]) -> Result<f64> {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for s in corpus {
        let Some(g) = s.gold_tags() else {
            return Err(Error::InvalidInput("evaluation corpus has untagged tokens".into()));
        };
        pred.push(tagger.tag(s)?);
        gold.push(g);
    }
    accuracy(&gold, &pred)
}

/// Mean training loss of a fixed corpus as a function of the parameters,
/// without dropout. Drives gradient checking of the whole model.
pub struct CorpusObjective<'a> {
    pub tagger: &'a Tagger,
    pub corpus: &'a [Sentence],
}

impl Objective<TaggerParams> for CorpusObjective<'_> {
    fn loss(&self, params: &TaggerParams) -> Result<f64> {
        let mut total = 0.0;
        for s in self.corpus {
            let ids = self.tagger.word_ids(&s.tokens);
            total += self.tagger.sentence_loss(params, s, ids)?.unwrap_or(0.0);
        }
        Ok(total / self.corpus.len() as f64)
    }

    fn loss_and_grad(&self, params: &TaggerParams) -> Result<(f64, TaggerParams)> {
        let mut grads = TaggerGrads::new(params);
        let scale = 1.0 / self.corpus.len() as f64;
        let mut total = 0.0;
        for s in self.corpus {
            let ids = self.tagger.word_ids(&s.tokens);
            total += self
                .tagger
                .sentence_loss_and_grad(params, s, ids, scale, &mut grads)?
                .unwrap_or(0.0);
        }
        Ok((total * scale, grads.params))
    }
}
