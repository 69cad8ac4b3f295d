//! Two-column tagged corpus format.
//!
//! One token per line, `token<TAB>tag` or a bare `token` for untagged
//! positions; sentences end at a blank line; lines starting with `#` are
//! comments, except `# coverage=<float>` which attaches a coverage score to
//! the sentence being read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{Sentence, TagSet};
use crate::error::{Error, Result};

const COVERAGE_PREFIX: &str = "# coverage=";

pub fn parse_corpus<R: BufRead>(reader: R, tagset: &TagSet) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut coverage = None;

    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<Option<usize>>, coverage: &mut Option<f64>| {
        if !tokens.is_empty() {
            let mask = tags.iter().map(Option::is_some).collect();
            let mut s = Sentence::new(std::mem::take(tokens), std::mem::take(tags), mask)
                .expect("parser keeps fields aligned");
            s.coverage = coverage.take();
            sentences.push(s);
        }
        *coverage = None;
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags, &mut coverage);
            continue;
        }
        if let Some(rest) = line.strip_prefix(COVERAGE_PREFIX) {
            let v: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid coverage value {rest:?}")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::parse(lineno, format!("coverage {v} outside [0, 1]")));
            }
            coverage = Some(v);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let token = fields.next().unwrap_or_default();
        let tag = fields.next();
        if fields.next().is_some() {
            return Err(Error::parse(lineno, "expected at most two tab-separated fields"));
        }
        if token.is_empty() {
            return Err(Error::parse(lineno, "empty token"));
        }
        let tag = match tag {
            None => None,
            Some(t) => Some(
                tagset
                    .index(t)
                    .ok_or_else(|| Error::parse(lineno, format!("unknown tag {t:?}")))?,
            ),
        };
        tokens.push(token.to_string());
        tags.push(tag);
    }
    flush(&mut tokens, &mut tags, &mut coverage);
    Ok(sentences)
}

pub fn parse_corpus_str(text: &str, tagset: &TagSet) -> Result<Vec<Sentence>> {
    parse_corpus(text.as_bytes(), tagset)
}

pub fn read_corpus(path: impl AsRef<Path>, tagset: &TagSet) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_corpus(BufReader::new(f), tagset).map_err(|e| e.in_file(path))
}

/// Writes sentences in the corpus format. Tagged positions are written
/// with their tag regardless of the loss mask.
pub fn write_corpus<W: Write>(mut w: W, sentences: &[Sentence], tagset: &TagSet) -> Result<()> {
    for s in sentences {
        if let Some(c) = s.coverage {
            writeln!(w, "{COVERAGE_PREFIX}{c}")?;
        }
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            if tok.contains(['\t', '\n', '\r']) || tok.starts_with('#') || tok.trim().is_empty() {
                return Err(Error::InvalidInput(format!(
                    "token {tok:?} cannot be written in the corpus format"
                )));
            }
            match tag {
                Some(t) => writeln!(w, "{tok}\t{}", tagset.name(*t))?,
                None => writeln!(w, "{tok}")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn corpus_to_string(sentences: &[Sentence], tagset: &TagSet) -> Result<String> {
    let mut buf = Vec::new();
    write_corpus(&mut buf, sentences, tagset)?;
    Ok(String::from_utf8(buf).expect("corpus output is UTF-8"))
}

pub fn save_corpus(path: impl AsRef<Path>, sentences: &[Sentence], tagset: &TagSet) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    write_corpus(BufWriter::new(f), sentences, tagset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts() -> TagSet {
        TagSet::universal()
    }

    #[test]
    fn tagged_sentence() {
        let s = parse_corpus_str("the\tDET\ncat\tNOUN\n\n", &ts()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens, ["the", "cat"]);
        assert_eq!(s[0].gold_tags(), Some(vec![5, 0]));
        assert_eq!(s[0].loss_mask, [true, true]);
    }

    #[test]
    fn untagged_sentence() {
        let s = parse_corpus_str("foo\nbar\n\n", &ts()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tags, [None, None]);
        assert_eq!(s[0].loss_mask, [false, false]);
    }

    #[test]
    fn comments_coverage_and_missing_final_blank() {
        let text = "# sent 1\n# coverage=0.625\na\tNOUN\nb\n\n\n# coverage=1\nc\t.\n";
        let s = parse_corpus_str(text, &ts()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].coverage, Some(0.625));
        assert_eq!(s[0].loss_mask, [true, false]);
        assert_eq!(s[1].coverage, Some(1.0));
        assert_eq!(s[1].tags, [Some(10)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_corpus_str("a\tNOUN\nb\tNN\n", &ts()) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_corpus_str("a\tNOUN\n\n\tVERB\n", &ts()) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_corpus_str("a\tNOUN\tX\n", &ts()).is_err());
        assert!(parse_corpus_str("# coverage=abc\na\n", &ts()).is_err());
    }

    #[test]
    fn emit_then_parse() {
        let text = "# coverage=0.1\nthe\tDET\ncat\nsat\tVERB\n\nok\tX\n\n";
        let parsed = parse_corpus_str(text, &ts()).unwrap();
        let emitted = corpus_to_string(&parsed, &ts()).unwrap();
        assert_eq!(emitted, text);
        assert_eq!(parse_corpus_str(&emitted, &ts()).unwrap(), parsed);
    }

    #[test]
    fn unwritable_tokens_are_rejected() {
        let s = Sentence::untagged(vec!["#x".into()]).unwrap();
        assert!(corpus_to_string(&[s], &ts()).is_err());
    }
}
