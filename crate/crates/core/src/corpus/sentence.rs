use crate::corpus::TagId;
use crate::error::{Error, Result};

/// A token sequence with optional per-token tags and a training-loss mask.
///
/// A position contributes to the training loss only when it is tagged and
/// its mask is set; untagged positions are always masked out.
#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub tags: Vec<Option<TagId>>,
    pub loss_mask: Vec<bool>,
    /// Mean alignment coverage, when the sentence came out of projection.
    pub coverage: Option<f64>,
}

impl Sentence {
    pub fn tagged(tokens: Vec<String>, tags: Vec<TagId>) -> Result<Self> {
        let n = tags.len();
        Sentence::new(tokens, tags.into_iter().map(Some).collect(), vec![true; n])
    }

    pub fn untagged(tokens: Vec<String>) -> Result<Self> {
        let n = tokens.len();
        Sentence::new(tokens, vec![None; n], vec![false; n])
    }

    pub fn new(tokens: Vec<String>, tags: Vec<Option<TagId>>, loss_mask: Vec<bool>) -> Result<Self> {
        if tokens.len() != tags.len() || tokens.len() != loss_mask.len() {
            return Err(Error::InvalidInput(format!(
                "sentence fields differ in length: {} tokens, {} tags, {} mask entries",
                tokens.len(),
                tags.len(),
                loss_mask.len()
            )));
        }
        if tokens.iter().any(String::is_empty) {
            return Err(Error::InvalidInput("empty token".into()));
        }
        let loss_mask = loss_mask
            .into_iter()
            .zip(&tags)
            .map(|(m, t)| m && t.is_some())
            .collect();
        Ok(Sentence {
            tokens,
            tags,
            loss_mask,
            coverage: None,
        })
    }

    pub fn from_words(words: &[&str], tags: &[TagId]) -> Result<Self> {
        Sentence::tagged(words.iter().map(|w| w.to_string()).collect(), tags.to_vec())
    }

    pub fn with_coverage(mut self, coverage: f64) -> Self {
        self.coverage = Some(coverage);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// All tags, when every position is tagged.
    pub fn gold_tags(&self) -> Option<Vec<TagId>> {
        self.tags.iter().copied().collect()
    }

    /// Number of positions that contribute to the training loss.
    pub fn num_trainable(&self) -> usize {
        self.loss_mask.iter().filter(|&&m| m).count()
    }
}
