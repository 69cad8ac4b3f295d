use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of coarse universal tags.
pub const NUM_TAGS: usize = 12;

pub const UNIVERSAL_TAGS: [&str; NUM_TAGS] = [
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", "PUNCT", "X",
];

/// Index of a tag within a [`TagSet`].
pub type TagId = usize;

/// Ordered inventory of the 12 coarse tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    names: Vec<String>,
}

impl TagSet {
    pub fn universal() -> Self {
        TagSet {
            names: UNIVERSAL_TAGS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        if names.len() != NUM_TAGS {
            return Err(Error::Config(format!(
                "a tag set needs exactly {NUM_TAGS} tags, got {}",
                names.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains(char::is_whitespace) {
                return Err(Error::Config(format!("invalid tag name {n:?}")));
            }
            if names[..i].contains(n) {
                return Err(Error::Config(format!("duplicate tag {n}")));
            }
        }
        Ok(TagSet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: TagId) -> &str {
        &self.names[id]
    }

    /// Looks up a tag; `.` is accepted for `PUNCT` when the set has no `.` tag.
    pub fn index(&self, name: &str) -> Option<TagId> {
        self.names.iter().position(|n| n == name).or_else(|| {
            if name == "." {
                self.names.iter().position(|n| n == "PUNCT")
            } else {
                None
            }
        })
    }
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet::universal()
    }
}
