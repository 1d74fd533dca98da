//! Canonical interchange format: one JSON object per line.
//!
//! ```json
//! {"id":"essay001","source_corpus":"PersuasiveEssays","text":"...","spans":[{"start_char":0,"end_char":14,"kind":"Claim"}]}
//! ```
//!
//! Offsets are characters. The optional `tokens` field pins the original
//! tokenization (as `[start, end]` pairs) so that corpora ingested from
//! token tables keep their token counts; without it the text is re-tokenized.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{snap_to_tokens, tokenize, ComponentSpan, ComponentType, LabeledDocument, Parsed, SourceCorpus, Token, Warning};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalSpan {
    pub start_char: usize,
    pub end_char: usize,
    pub kind: ComponentType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalRecord {
    pub id: String,
    pub source_corpus: SourceCorpus,
    pub text: String,
    pub spans: Vec<CanonicalSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<[usize; 2]>>,
}

impl CanonicalRecord {
    pub fn from_document(doc: &LabeledDocument) -> Self {
        let spans = doc
            .spans
            .iter()
            .map(|s| {
                let (start_char, end_char) = doc.span_chars(s);
                CanonicalSpan {
                    start_char,
                    end_char,
                    kind: s.kind,
                }
            })
            .collect();
        let retokenized = tokenize(&doc.text);
        let tokens = (retokenized != doc.tokens).then(|| doc.tokens.iter().map(|t| [t.start, t.end]).collect());
        Self {
            id: doc.id.clone(),
            source_corpus: doc.source_corpus,
            text: doc.text.clone(),
            spans,
            tokens,
        }
    }

    pub fn into_document(self, line: Option<usize>, warnings: &mut Vec<Warning>) -> Result<LabeledDocument> {
        let tokens = match &self.tokens {
            None => tokenize(&self.text),
            Some(extents) => {
                let chars: Vec<char> = self.text.chars().collect();
                let mut tokens = Vec::with_capacity(extents.len());
                for &[start, end] in extents {
                    if start >= end || end > chars.len() {
                        return Err(Error::InvalidDocument {
                            id: self.id.clone(),
                            message: format!("token extent {start}..{end} out of range"),
                        });
                    }
                    tokens.push(Token::new(chars[start..end].iter().collect::<String>(), start, end));
                }
                tokens
            }
        };
        let mut spans = Vec::with_capacity(self.spans.len());
        for s in &self.spans {
            let Some((first, last, widened)) = snap_to_tokens(&tokens, s.start_char, s.end_char) else {
                warnings.push(Warning::new(line, format!("{}: span {}..{} covers no token; dropped", self.id, s.start_char, s.end_char)));
                continue;
            };
            if widened {
                warnings.push(Warning::new(line, format!("{}: span {}..{} widened to token boundaries", self.id, s.start_char, s.end_char)));
            }
            spans.push(ComponentSpan::new(first, last, s.kind));
        }
        LabeledDocument::new(self.id, self.source_corpus, self.text, tokens, spans)
    }
}

pub fn write_canonical<W: Write>(mut out: W, docs: &[LabeledDocument]) -> Result<()> {
    for doc in docs {
        let line = serde_json::to_string(&CanonicalRecord::from_document(doc))?;
        writeln!(out, "{line}").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn write_canonical_file(path: &Path, docs: &[LabeledDocument]) -> Result<()> {
    let mut buf = Vec::new();
    write_canonical(&mut buf, docs)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_canonical<R: BufRead>(input: R) -> Result<Parsed<Vec<LabeledDocument>>> {
    let mut docs = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CanonicalRecord = serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        docs.push(record.into_document(Some(line_no), &mut warnings)?);
    }
    Ok(Parsed { value: docs, warnings })
}

pub fn read_canonical_file(path: &Path) -> Result<Parsed<Vec<LabeledDocument>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_canonical(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_token_table, BioMode};

    #[test]
    fn plain_document_round_trips_without_tokens_field() {
        let doc = LabeledDocument::from_text(
            "d",
            SourceCorpus::Synthetic,
            "We act. Prices rose.",
            vec![ComponentSpan::new(0, 2, ComponentType::Claim)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_canonical(&mut buf, std::slice::from_ref(&doc)).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(!line.contains("tokens"));
        assert!(line.contains(r#""spans":[{"start_char":0,"end_char":7,"kind":"Claim"}]"#), "{line}");
        let back = read_canonical(&buf[..]).unwrap().value;
        assert_eq!(back, vec![doc]);
    }

    #[test]
    fn table_tokens_are_pinned() {
        let rows = [("do", "B-Claim"), ("n't", "I-Claim"), ("go", "I-Claim")];
        let doc = parse_token_table("t", SourceCorpus::USElecDeb60To16, &rows, BioMode::Lenient).unwrap().value;
        let mut buf = Vec::new();
        write_canonical(&mut buf, std::slice::from_ref(&doc)).unwrap();
        let back = read_canonical(&buf[..]).unwrap().value;
        assert_eq!(back[0].tokens.len(), 3);
        assert_eq!(back, vec![doc]);
    }

    #[test]
    fn unknown_field_rejected_with_line() {
        let input = "{\"id\":\"a\",\"source_corpus\":\"Synthetic\",\"text\":\"x\",\"spans\":[]}\n{\"id\":\"b\",\"bogus\":1}\n";
        let err = read_canonical(input.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
