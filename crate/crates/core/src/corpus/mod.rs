//! Corpora, tag sets, word embeddings and vocabularies.

mod embeddings;
mod format;
mod sentence;
mod tagset;
mod vocab;

pub use embeddings::{load_embeddings, read_embeddings, write_embeddings, EmbeddingTable, UNK_WORD};
pub use format::{
    corpus_to_string, parse_corpus, parse_corpus_str, read_corpus, save_corpus, write_corpus,
};
pub use sentence::Sentence;
pub use tagset::{TagId, TagSet, NUM_TAGS, UNIVERSAL_TAGS};
pub use vocab::{build_vocab, Vocab, UNK_INDEX};
