use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingTable, Sentence, TagId, TagSet, Vocab, UNK_INDEX};
use crate::error::{Error, Result};
use crate::lexicon::LexiconFeature;
use crate::nn::{
    add_assign, matvec_acc, matvec_t_acc, outer_acc, softmax_xent, BiEncoderParams, BiTrace,
    ParamSet, Tensor,
};
use crate::tagger::{DropoutScheme, TrainConfig};

/// Character inventory seen in training. Index 0 is the unknown character.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl From<String> for CharVocab {
    fn from(s: String) -> Self {
        let chars: Vec<char> = s.chars().collect();
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();
        CharVocab { chars, index }
    }
}

impl From<CharVocab> for String {
    fn from(v: CharVocab) -> Self {
        v.chars.into_iter().collect()
    }
}

impl CharVocab {
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut seen = String::new();
        let mut set = std::collections::HashSet::new();
        for t in tokens {
            for c in t.chars() {
                if set.insert(c) {
                    seen.push(c);
                }
            }
        }
        CharVocab::from(seen)
    }

    /// Number of rows in the character table, UNK included.
    pub fn len(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn get(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(0)
    }
}

/// All trainable tensors of the tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerParams {
    pub word_emb: Tensor,
    pub char_emb: Tensor,
    pub char_enc: BiEncoderParams,
    pub word_enc: BiEncoderParams,
    /// One property-embedding matrix per embedded lexicon source.
    pub lex_emb: Vec<Option<Tensor>>,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl ParamSet for TaggerParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("word_emb".to_string(), &self.word_emb),
            ("char_emb".to_string(), &self.char_emb),
        ];
        out.extend(self.char_enc.tensors().into_iter().map(|(n, t)| (format!("char_enc.{n}"), t)));
        out.extend(self.word_enc.tensors().into_iter().map(|(n, t)| (format!("word_enc.{n}"), t)));
        for (i, e) in self.lex_emb.iter().enumerate() {
            if let Some(t) = e {
                out.push((format!("lex_emb.{i}"), t));
            }
        }
        out.push(("out_w".to_string(), &self.out_w));
        out.push(("out_b".to_string(), &self.out_b));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.word_emb, &mut self.char_emb];
        out.extend(self.char_enc.tensors_mut());
        out.extend(self.word_enc.tensors_mut());
        out.extend(self.lex_emb.iter_mut().flatten());
        out.push(&mut self.out_w);
        out.push(&mut self.out_b);
        out
    }
}

/// Lookup tables are treated as `1 -> d` maps for the Glorot range.
fn lookup_range(dim: usize) -> f64 {
    Tensor::glorot_range(1, dim)
}

/// Gradient buffer with sparse row tracking for the lookup tables.
#[derive(Debug, Clone)]
pub struct TaggerGrads {
    pub params: TaggerParams,
    word_rows: Vec<usize>,
    char_rows: Vec<usize>,
}

impl TaggerGrads {
    pub fn new(like: &TaggerParams) -> Self {
        let mut params = like.clone();
        params.zero();
        TaggerGrads {
            params,
            word_rows: Vec::new(),
            char_rows: Vec::new(),
        }
    }

    fn dense(&self) -> Vec<&Tensor> {
        let p = &self.params;
        let mut v: Vec<&Tensor> = p.char_enc.tensors().into_iter().map(|(_, t)| t).collect();
        v.extend(p.word_enc.tensors().into_iter().map(|(_, t)| t));
        v.extend(p.lex_emb.iter().flatten());
        v.push(&p.out_w);
        v.push(&p.out_b);
        v
    }

    /// Squared L2 norm over everything touched since the last reset.
    pub fn sum_squares(&self) -> f64 {
        let dense: f64 = self.dense().iter().map(|t| t.sum_squares()).sum();
        let words: f64 = self
            .word_rows
            .iter()
            .map(|&r| self.params.word_emb.row(r).iter().map(|v| v * v).sum::<f64>())
            .sum();
        let chars: f64 = self
            .char_rows
            .iter()
            .map(|&r| self.params.char_emb.row(r).iter().map(|v| v * v).sum::<f64>())
            .sum();
        dense + words + chars
    }

    /// `params -= lr * grads`, then clears the buffer.
    pub fn apply(&mut self, params: &mut TaggerParams, lr: f64) {
        fn axpy(p: &mut Tensor, g: &Tensor, lr: f64) {
            for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                *pv -= lr * gv;
            }
        }
        let g = &mut self.params;
        for (p, gt) in params.char_enc.tensors_mut().into_iter().zip(g.char_enc.tensors()) {
            axpy(p, gt.1, lr);
        }
        for (p, gt) in params.word_enc.tensors_mut().into_iter().zip(g.word_enc.tensors()) {
            axpy(p, gt.1, lr);
        }
        for (p, gt) in params.lex_emb.iter_mut().zip(&g.lex_emb) {
            if let (Some(p), Some(gt)) = (p, gt) {
                axpy(p, gt, lr);
            }
        }
        axpy(&mut params.out_w, &g.out_w, lr);
        axpy(&mut params.out_b, &g.out_b, lr);
        self.word_rows.sort_unstable();
        self.word_rows.dedup();
        for &r in &self.word_rows {
            for (pv, gv) in params.word_emb.row_mut(r).iter_mut().zip(g.word_emb.row(r)) {
                *pv -= lr * gv;
            }
        }
        self.char_rows.sort_unstable();
        self.char_rows.dedup();
        for &r in &self.char_rows {
            for (pv, gv) in params.char_emb.row_mut(r).iter_mut().zip(g.char_emb.row(r)) {
                *pv -= lr * gv;
            }
        }
        self.reset();
    }

    pub fn reset(&mut self) {
        let g = &mut self.params;
        g.char_enc.zero();
        g.word_enc.zero();
        for t in g.lex_emb.iter_mut().flatten() {
            t.fill(0.0);
        }
        g.out_w.fill(0.0);
        g.out_b.fill(0.0);
        for &r in &self.word_rows {
            g.word_emb.row_mut(r).fill(0.0);
        }
        for &r in &self.char_rows {
            g.char_emb.row_mut(r).fill(0.0);
        }
        self.word_rows.clear();
        self.char_rows.clear();
    }
}

struct TokenTrace {
    char_ids: Vec<usize>,
    trace: BiTrace,
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct SentenceTrace {
    word_ids: Vec<usize>,
    tokens: Vec<TokenTrace>,
    word_trace: BiTrace,
    hidden: Vec<Vec<f64>>,
    pub(crate) logits: Vec<Vec<f64>>,
}

/// The full tagger: word embedding, character bi-LSTM and lexicon features
/// concatenated per token, a word-level bi-LSTM, and a linear tag classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagger {
    pub(crate) config: TrainConfig,
    pub(crate) tagset: TagSet,
    pub(crate) vocab: Vocab,
    pub(crate) extra_words: Vec<String>,
    pub(crate) extra_index: HashMap<String, usize>,
    pub(crate) chars: CharVocab,
    pub(crate) lexicons: Vec<LexiconFeature>,
    pub params: TaggerParams,
}

impl Tagger {
    /// Fresh randomly initialized model.
    ///
    /// `extra_words` extend the word table beyond the training vocabulary
    /// (typically words that only occur in pre-trained embeddings).
    pub fn new<R: Rng + ?Sized>(
        config: TrainConfig,
        tagset: TagSet,
        vocab: Vocab,
        extra_words: Vec<String>,
        chars: CharVocab,
        lexicons: Vec<LexiconFeature>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let d = config.dims.clone();
        let rows = vocab.len() + extra_words.len();
        let word_emb = Tensor::uniform(&[rows, d.word_dim], lookup_range(d.word_dim), rng);
        let char_emb = Tensor::uniform(&[chars.len(), d.char_dim], lookup_range(d.char_dim), rng);
        let char_enc = BiEncoderParams::new(d.char_dim, d.char_hidden, rng);
        let lex_dim: usize = lexicons.iter().map(LexiconFeature::dim).sum();
        let input = d.word_dim + 2 * d.char_hidden + lex_dim;
        let word_enc = BiEncoderParams::new(input, d.word_hidden, rng);
        let lex_emb = lexicons
            .iter()
            .map(|f| {
                f.embedding_shape()
                    .map(|[m, l]| Tensor::uniform(&[m, l], Tensor::glorot_range(m, l), rng))
            })
            .collect();
        let t = tagset.len();
        let out_w = Tensor::uniform(&[t, 2 * d.word_hidden], Tensor::glorot_range(2 * d.word_hidden, t), rng);
        let out_b = Tensor::zeros(&[t]);
        let extra_index = index_extra(&extra_words);
        Ok(Tagger {
            config,
            tagset,
            vocab,
            extra_words,
            extra_index,
            chars,
            lexicons,
            params: TaggerParams {
                word_emb,
                char_emb,
                char_enc,
                word_enc,
                lex_emb,
                out_w,
                out_b,
            },
        })
    }

    /// Overwrites word-table rows with pre-trained vectors. Rows for words
    /// the table lacks (and the UNK row) get the table's UNK vector.
    pub fn init_from_embeddings(&mut self, table: &EmbeddingTable) -> Result<()> {
        if table.dim() != self.config.dims.word_dim {
            return Err(Error::Config(format!(
                "pre-trained embeddings have dimension {}, model expects {}",
                table.dim(),
                self.config.dims.word_dim
            )));
        }
        self.params.word_emb.row_mut(UNK_INDEX).copy_from_slice(table.unk());
        for (i, w) in self.vocab.words().enumerate() {
            self.params.word_emb.row_mut(i + 1).copy_from_slice(table.lookup(w));
        }
        let base = self.vocab.len();
        for (j, w) in self.extra_words.iter().enumerate() {
            self.params.word_emb.row_mut(base + j).copy_from_slice(table.lookup(w));
        }
        Ok(())
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    /// Training vocabulary (frequencies, OOV status).
    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn lexicons(&self) -> &[LexiconFeature] {
        &self.lexicons
    }

    pub fn lexicon_dim(&self) -> usize {
        self.lexicons.iter().map(LexiconFeature::dim).sum()
    }

    /// Width of the per-token input vector.
    pub fn input_dim(&self) -> usize {
        let d = &self.config.dims;
        d.word_dim + 2 * d.char_hidden + self.lexicon_dim()
    }

    pub fn word_id(&self, word: &str) -> usize {
        match self.vocab.get(word) {
            UNK_INDEX => self
                .extra_index
                .get(word)
                .map_or(UNK_INDEX, |&j| self.vocab.len() + j),
            i => i,
        }
    }

    pub fn word_ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.word_id(t)).collect()
    }

    /// Probability that word-table row `id` is replaced by UNK in training.
    pub fn drop_probability(&self, id: usize) -> f64 {
        let p = self.config.word_dropout;
        if id == UNK_INDEX || id >= self.vocab.len() || p == 0.0 {
            return 0.0;
        }
        match self.config.dropout_scheme {
            DropoutScheme::Fixed => p,
            DropoutScheme::FrequencyScaled => p / (p + self.vocab.freq_of(id) as f64),
        }
    }

    /// Word ids with word dropout applied.
    pub fn sample_word_ids<R: Rng + ?Sized>(&self, tokens: &[String], rng: &mut R) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| {
                let id = self.word_id(t);
                let p = self.drop_probability(id);
                if p > 0.0 && rng.random::<f64>() < p {
                    UNK_INDEX
                } else {
                    id
                }
            })
            .collect()
    }

    /// Character-table rows of `token`.
    pub fn char_ids(&self, token: &str) -> Vec<usize> {
        token.chars().map(|c| self.chars.get(c)).collect()
    }

    fn encode_chars(&self, params: &TaggerParams, token: &str) -> Result<(Vec<f64>, TokenTrace)> {
        let char_ids = self.char_ids(token);
        if char_ids.is_empty() {
            return Err(Error::InvalidInput("empty token".into()));
        }
        let rows: Vec<&[f64]> = char_ids.iter().map(|&c| params.char_emb.row(c)).collect();
        let (out, trace) = params.char_enc.encode(&rows)?;
        let h = params.char_enc.hidden_size();
        let mut c = Vec::with_capacity(2 * h);
        c.extend_from_slice(&out[out.len() - 1][..h]);
        c.extend_from_slice(&out[0][h..]);
        Ok((c, TokenTrace { char_ids, trace }))
    }

    fn token_input(
        &self,
        params: &TaggerParams,
        token: &str,
        word_id: usize,
    ) -> Result<(Vec<f64>, TokenTrace)> {
        let mut x = Vec::with_capacity(self.input_dim());
        x.extend_from_slice(params.word_emb.row(word_id));
        let (c, trace) = self.encode_chars(params, token)?;
        x.extend_from_slice(&c);
        let start = x.len();
        x.resize(start + self.lexicon_dim(), 0.0);
        let mut offset = start;
        for (f, e) in self.lexicons.iter().zip(&params.lex_emb) {
            let d = f.dim();
            f.encode_into(token, e.as_ref(), &mut x[offset..offset + d]);
            offset += d;
        }
        Ok((x, trace))
    }

    /// Input vector of one position: word embedding, character encoder
    /// states, lexicon features. Word dropout applies only when `training`.
    pub fn build_input<R: Rng + ?Sized>(
        &self,
        sentence: &Sentence,
        position: usize,
        training: bool,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let token = sentence.tokens.get(position).ok_or_else(|| {
            Error::InvalidInput(format!("position {position} out of range"))
        })?;
        let mut id = self.word_id(token);
        if training {
            let p = self.drop_probability(id);
            if p > 0.0 && rng.random::<f64>() < p {
                id = UNK_INDEX;
            }
        }
        self.token_input(&self.params, token, id).map(|(x, _)| x)
    }

    pub(crate) fn forward_trace(
        &self,
        params: &TaggerParams,
        tokens: &[String],
        word_ids: Vec<usize>,
    ) -> Result<SentenceTrace> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("cannot tag an empty sentence".into()));
        }
        let mut inputs = Vec::with_capacity(tokens.len());
        let mut token_traces = Vec::with_capacity(tokens.len());
        for (tok, &id) in tokens.iter().zip(&word_ids) {
            let (x, tr) = self.token_input(params, tok, id)?;
            inputs.push(x);
            token_traces.push(tr);
        }
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let (hidden, word_trace) = params.word_enc.encode(&refs)?;
        let t = self.tagset.len();
        let logits = hidden
            .iter()
            .map(|h| {
                let mut z = params.out_b.data().to_vec();
                matvec_acc(&mut z, params.out_w.data(), h);
                debug_assert_eq!(z.len(), t);
                z
            })
            .collect();
        Ok(SentenceTrace {
            word_ids,
            tokens: token_traces,
            word_trace,
            hidden,
            logits,
        })
    }

    /// Per-position tag logits, without dropout.
    pub fn forward(&self, sentence: &Sentence) -> Result<Vec<Vec<f64>>> {
        self.forward_tokens(&sentence.tokens)
    }

    pub fn forward_tokens(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>> {
        let ids = self.word_ids(tokens);
        Ok(self.forward_trace(&self.params, tokens, ids)?.logits)
    }

    /// Mean cross-entropy over the trainable positions of `sentence`; `None`
    /// when it has none.
    pub(crate) fn sentence_loss(
        &self,
        params: &TaggerParams,
        sentence: &Sentence,
        word_ids: Vec<usize>,
    ) -> Result<Option<f64>> {
        let n = sentence.num_trainable();
        if n == 0 {
            return Ok(None);
        }
        let trace = self.forward_trace(params, &sentence.tokens, word_ids)?;
        let mut loss = 0.0;
        for (i, z) in trace.logits.iter().enumerate() {
            if let (true, Some(gold)) = (sentence.loss_mask[i], sentence.tags[i]) {
                loss += softmax_xent(z, gold)?.0;
            }
        }
        Ok(Some(loss / n as f64))
    }

    /// Forward and backward pass; gradients of `scale * loss` are accumulated
    /// into `grads`. Returns the unscaled loss, `None` when nothing is trainable.
    pub(crate) fn sentence_loss_and_grad(
        &self,
        params: &TaggerParams,
        sentence: &Sentence,
        word_ids: Vec<usize>,
        scale: f64,
        grads: &mut TaggerGrads,
    ) -> Result<Option<f64>> {
        let n = sentence.num_trainable();
        if n == 0 {
            return Ok(None);
        }
        let trace = self.forward_trace(params, &sentence.tokens, word_ids)?;
        let len = sentence.len();
        let hw = params.word_enc.output_size();
        let mut d_hidden = vec![vec![0.0; hw]; len];
        let mut loss = 0.0;
        let g = &mut grads.params;
        for i in 0..len {
            let (true, Some(gold)) = (sentence.loss_mask[i], sentence.tags[i]) else {
                continue;
            };
            let (l, mut dz) = softmax_xent(&trace.logits[i], gold)?;
            loss += l;
            let w = scale / n as f64;
            dz.iter_mut().for_each(|v| *v *= w);
            outer_acc(g.out_w.data_mut(), &dz, &trace.hidden[i]);
            add_assign(g.out_b.data_mut(), &dz);
            matvec_t_acc(&mut d_hidden[i], params.out_w.data(), &dz);
        }
        let d_inputs = params
            .word_enc
            .backward(&trace.word_trace, &d_hidden, &mut g.word_enc);

        let dw = self.config.dims.word_dim;
        let hc = params.char_enc.hidden_size();
        for (i, dx) in d_inputs.iter().enumerate() {
            let row = trace.word_ids[i];
            add_assign(g.word_emb.row_mut(row), &dx[..dw]);
            grads.word_rows.push(row);

            let tt = &trace.tokens[i];
            let nc = tt.char_ids.len();
            let mut d_char_out = vec![vec![0.0; 2 * hc]; nc];
            d_char_out[nc - 1][..hc].copy_from_slice(&dx[dw..dw + hc]);
            add_assign(&mut d_char_out[0][hc..], &dx[dw + hc..dw + 2 * hc]);
            let d_chars = params.char_enc.backward(&tt.trace, &d_char_out, &mut g.char_enc);
            for (&c, dc) in tt.char_ids.iter().zip(&d_chars) {
                add_assign(g.char_emb.row_mut(c), dc);
                grads.char_rows.push(c);
            }

            let mut offset = dw + 2 * hc;
            for (f, ge) in self.lexicons.iter().zip(g.lex_emb.iter_mut()) {
                let d = f.dim();
                f.backward(&sentence.tokens[i], &dx[offset..offset + d], ge.as_mut());
                offset += d;
            }
        }
        Ok(Some(loss / n as f64))
    }

    /// Argmax tag per position; ties go to the lowest tag index.
    pub fn tag(&self, sentence: &Sentence) -> Result<Vec<TagId>> {
        Ok(self.forward(sentence)?.iter().map(|z| argmax(z)).collect())
    }

    pub fn tag_tokens(&self, tokens: &[String]) -> Result<Vec<TagId>> {
        Ok(self.forward_tokens(tokens)?.iter().map(|z| argmax(z)).collect())
    }
}

pub(crate) fn index_extra(words: &[String]) -> HashMap<String, usize> {
    words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Argmax restricted to `allowed` indices (sorted); lowest index on ties.
pub fn argmax_within(values: &[f64], allowed: &[usize]) -> usize {
    let mut best = allowed[0];
    for &i in &allowed[1..] {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}
