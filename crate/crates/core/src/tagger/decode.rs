use crate::corpus::{Sentence, TagId};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::tagger::model::{argmax, argmax_within};
use crate::tagger::Tagger;

/// Argmax decoding restricted, for dictionary words, to the word's tags.
///
/// Ties go to the lowest tag index in either case.
pub fn constrained_argmax(logits: &[Vec<f64>], tokens: &[String], dict: &Lexicon) -> Vec<TagId> {
    logits
        .iter()
        .zip(tokens)
        .map(|(z, tok)| match dict.props(tok) {
            Some(allowed) => argmax_within(z, allowed),
            None => argmax(z),
        })
        .collect()
}

impl Tagger {
    pub fn tag_with_type_constraints(&self, sentence: &Sentence, dict: &Lexicon) -> Result<Vec<TagId>> {
        if !dict.is_tag_dictionary_for(&self.tagset) {
            return Err(Error::Config(format!(
                "lexicon {} is not a tag dictionary over the model's tag set",
                dict.name()
            )));
        }
        let logits = self.forward(sentence)?;
        Ok(constrained_argmax(&logits, &sentence.tokens, dict))
    }
}
