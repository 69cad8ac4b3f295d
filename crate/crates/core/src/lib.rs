//! Part-of-speech tagging from distant supervision.
//!
//! Training data comes from annotation projection: tags of several source
//! languages are carried over word alignments and combined by weighted voting
//! ([`projection`]). The best-covered sentences train a bi-LSTM tagger
//! ([`tagger`]) whose input can be enriched with tag dictionaries and
//! morphological lexicons ([`lexicon`]).

pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod lexicon;
pub mod nn;
pub mod projection;
pub mod synth;
pub mod tagger;

pub use corpus::{
    build_vocab, read_corpus, save_corpus, EmbeddingTable, Sentence, TagId, TagSet, Vocab,
    NUM_TAGS, UNIVERSAL_TAGS,
};
pub use error::{Error, Result};
pub use eval::{accuracy, multi_seed, oov_split, pearson, EvalReport, RunKey, SelectionMode};
pub use lexicon::{
    FeatureMode, Lexicon, LexiconFeatureConfig, LexiconSource, Pooling, PropertyInventory,
};
pub use projection::{select_top_k, vote_token, ProjectedSentence, SourceVote};
pub use tagger::{train, ModelDims, Tagger, TrainConfig, TrainInputs};
