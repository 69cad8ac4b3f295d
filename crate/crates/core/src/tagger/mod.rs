//! Bi-LSTM tagger over word, character and lexicon features.

mod config;
mod decode;
mod io;
mod model;
mod train;

pub use config::{DropoutScheme, ModelDims, TrainConfig};
pub use decode::constrained_argmax;
pub use io::{FORMAT_VERSION, MAGIC};
pub use model::{argmax, argmax_within, CharVocab, Tagger, TaggerGrads, TaggerParams};
pub use train::{tagged_accuracy, train, CorpusObjective, TrainInputs, TrainReport};
