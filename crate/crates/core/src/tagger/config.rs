use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::LexiconFeatureConfig;

/// Layer sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub word_dim: usize,
    pub char_dim: usize,
    pub char_hidden: usize,
    pub word_hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            word_dim: 64,
            char_dim: 32,
            char_hidden: 50,
            word_hidden: 100,
        }
    }
}

/// How word dropout picks tokens to replace by UNK.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropoutScheme {
    /// A token of training frequency `f` is dropped with probability `p / (p + f)`.
    FrequencyScaled,
    /// Every known token is dropped with probability `p`.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub word_dropout: f64,
    pub dropout_scheme: DropoutScheme,
    pub learning_rate: f64,
    pub seed: u64,
    pub min_freq: usize,
    pub dims: ModelDims,
    pub lexicon: LexiconFeatureConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            word_dropout: 0.25,
            dropout_scheme: DropoutScheme::FrequencyScaled,
            learning_rate: 0.1,
            seed: 1,
            min_freq: 1,
            dims: ModelDims::default(),
            lexicon: LexiconFeatureConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.word_dropout) {
            return Err(Error::Config(format!(
                "word dropout must be in [0, 1), got {}",
                self.word_dropout
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        let d = &self.dims;
        if d.word_dim == 0 || d.char_dim == 0 || d.char_hidden == 0 || d.word_hidden == 0 {
            return Err(Error::Config(format!("all dimensions must be positive: {d:?}")));
        }
        self.lexicon.validate()
    }
}
