use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;

/// Index reserved for unknown words.
pub const UNK_INDEX: usize = 0;

/// Training vocabulary with frequencies. Index 0 is UNK.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    words: Vec<String>,
    freqs: Vec<usize>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    words: Vec<String>,
    freqs: Vec<usize>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        let index = r
            .words
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocab {
            words: r.words,
            freqs: r.freqs,
            index,
        }
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            words: v.words,
            freqs: v.freqs,
        }
    }
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 1
    }

    /// Index of `word`, or [`UNK_INDEX`].
    pub fn get(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_INDEX)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Training frequency; 0 for words outside the vocabulary.
    pub fn freq(&self, word: &str) -> usize {
        self.index.get(word).map_or(0, |&i| self.freqs[i])
    }

    pub fn freq_of(&self, index: usize) -> usize {
        self.freqs[index]
    }

    /// Word at `index`; `None` for UNK.
    pub fn word(&self, index: usize) -> Option<&str> {
        (index != UNK_INDEX).then(|| self.words[index].as_str())
    }

    /// Non-UNK entries in index order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words[1..].iter().map(String::as_str)
    }
}

/// Indexes every training token seen at least `min_freq` times, in order of
/// first occurrence.
pub fn build_vocab(train: &[Sentence], min_freq: usize) -> Vocab {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for tok in train.iter().flat_map(|s| &s.tokens) {
        let c = counts.entry(tok.as_str()).or_insert(0);
        if *c == 0 {
            order.push(tok);
        }
        *c += 1;
    }
    let mut words = vec![String::from("<UNK>")];
    let mut freqs = vec![0];
    for w in order {
        let f = counts[w];
        if f >= min_freq.max(1) {
            words.push(w.to_string());
            freqs.push(f);
        }
    }
    Vocab::from(VocabRepr { words, freqs })
}
