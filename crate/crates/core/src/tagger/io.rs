//! Binary model container.
//!
//! Layout (little endian):
//!
//! ```text
//! b"DTAGMODL"  u32 format version
//! u64 metadata length, metadata as JSON (config, tag set, vocabularies, lexicons)
//! u32 tensor count, then per tensor:
//!     u32 name length, name, u32 rank, u64 extents, f64 values
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{TagSet, Vocab};
use crate::error::{Error, Result};
use crate::lexicon::LexiconFeature;
use crate::nn::{BiEncoderParams, ParamSet, Tensor};
use crate::tagger::model::index_extra;
use crate::tagger::{CharVocab, Tagger, TaggerParams, TrainConfig};

pub const MAGIC: &[u8; 8] = b"DTAGMODL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Metadata {
    config: TrainConfig,
    tagset: TagSet,
    vocab: Vocab,
    extra_words: Vec<String>,
    chars: CharVocab,
    lexicons: Vec<LexiconFeature>,
}

impl Tagger {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = Metadata {
            config: self.config.clone(),
            tagset: self.tagset.clone(),
            vocab: self.vocab.clone(),
            extra_words: self.extra_words.clone(),
            chars: self.chars.clone(),
            lexicons: self.lexicons.clone(),
        };
        let json = serde_json::to_vec(&meta).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        let tensors = self.params.tensors();
        w.write_all(&(tensors.len() as u32).to_le_bytes())?;
        for (name, t) in tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(t.len() * 8);
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Tagger> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("file too short for a model header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let meta_len = read_u64(&mut r)? as usize;
        let json = read_bytes(&mut r, meta_len)?;
        let meta: Metadata =
            serde_json::from_slice(&json).map_err(|e| Error::Format(format!("model metadata: {e}")))?;

        let mut params = skeleton(&meta)?;
        let count = read_u32(&mut r)? as usize;
        let expected: Vec<(String, Vec<usize>)> = params
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if count != expected.len() {
            return Err(Error::Format(format!(
                "model has {count} tensors, metadata implies {}",
                expected.len()
            )));
        }
        for ((name, shape), slot) in expected.into_iter().zip(params.tensors_mut()) {
            let name_len = read_u32(&mut r)? as usize;
            let got = String::from_utf8(read_bytes(&mut r, name_len)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            if got != name {
                return Err(Error::Format(format!("expected tensor {name}, found {got}")));
            }
            let rank = read_u32(&mut r)? as usize;
            let dims = (0..rank)
                .map(|_| read_u64(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if dims != shape {
                return Err(Error::Format(format!(
                    "tensor {name} has shape {dims:?}, expected {shape:?}"
                )));
            }
            let raw = read_bytes(&mut r, slot.len() * 8)?;
            for (v, b) in slot.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
                *v = f64::from_le_bytes(b.try_into().expect("chunk of 8"));
            }
            if !slot.all_finite() {
                return Err(Error::Numerical(format!("tensor {name} has non-finite values")));
            }
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after tensors", rest.len())));
        }
        let extra_index = index_extra(&meta.extra_words);
        Ok(Tagger {
            config: meta.config,
            tagset: meta.tagset,
            vocab: meta.vocab,
            extra_words: meta.extra_words,
            extra_index,
            chars: meta.chars,
            lexicons: meta.lexicons,
            params,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Tagger> {
        Tagger::read_from(bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Tagger> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
        Tagger::from_bytes(&bytes).map_err(|e| e.in_file(path))
    }

    /// Hex SHA-256 of the serialized model.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_bytes()?)))
    }
}

fn skeleton(meta: &Metadata) -> Result<TaggerParams> {
    meta.config.validate()?;
    let d = &meta.config.dims;
    let lex_dim: usize = meta.lexicons.iter().map(LexiconFeature::dim).sum();
    let t = meta.tagset.len();
    Ok(TaggerParams {
        word_emb: Tensor::zeros(&[meta.vocab.len() + meta.extra_words.len(), d.word_dim]),
        char_emb: Tensor::zeros(&[meta.chars.len(), d.char_dim]),
        char_enc: BiEncoderParams::zeros(d.char_dim, d.char_hidden),
        word_enc: BiEncoderParams::zeros(d.word_dim + 2 * d.char_hidden + lex_dim, d.word_hidden),
        lex_emb: meta
            .lexicons
            .iter()
            .map(|f| f.embedding_shape().map(|s| Tensor::zeros(&s)))
            .collect(),
        out_w: Tensor::zeros(&[t, 2 * d.word_hidden]),
        out_b: Tensor::zeros(&[t]),
    })
}

fn read_bytes<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf)?;
    if buf.len() != n {
        return Err(Error::Format("model file is truncated".into()));
    }
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("model file is truncated".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("model file is truncated".into()))?;
    Ok(u64::from_le_bytes(b))
}
