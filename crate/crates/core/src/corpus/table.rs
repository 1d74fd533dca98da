//! Two-column token/tag tables (one token per line, blank line between
//! documents).

use serde::{Deserialize, Serialize};

use super::{bio_to_spans, BioTag, LabeledDocument, Parsed, SourceCorpus, Token, Warning};
use crate::error::{Error, Result};

/// How BIO scheme violations are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BioMode {
    Strict,
    #[default]
    Lenient,
}

const NO_SPACE_BEFORE: &[&str] = &[".", ",", "!", "?", ";", ":", "'", ")", "]", "}"];

/// Joins tokens with single spaces, except after opening and before closing
/// punctuation. Straight double quotes alternate between opening and closing.
///
/// Returns the text and the character extent of every token in it.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> (String, Vec<Token>) {
    let mut text = String::new();
    let mut out = Vec::with_capacity(tokens.len());
    let mut pos = 0usize;
    let mut glue_next = false;
    let mut quote_open = false;
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        let closing_quote = tok == "\"" && quote_open;
        if i > 0 && !glue_next && !closing_quote && !NO_SPACE_BEFORE.contains(&tok) {
            text.push(' ');
            pos += 1;
        }
        glue_next = matches!(tok, "(" | "[" | "{") || (tok == "\"" && !quote_open);
        if tok == "\"" {
            quote_open = !quote_open;
        }
        let len = tok.chars().count();
        text.push_str(tok);
        out.push(Token::new(tok, pos, pos + len));
        pos += len;
    }
    (text, out)
}

/// Builds a document from `(token, tag)` rows.
///
/// Row numbers in errors and warnings are 1-based positions in `rows`.
pub fn parse_token_table<S: AsRef<str>, T: AsRef<str>>(
    id: &str,
    source_corpus: SourceCorpus,
    rows: &[(S, T)],
    mode: BioMode,
) -> Result<Parsed<LabeledDocument>> {
    parse_rows(id, source_corpus, rows, mode, 1)
}

fn parse_rows<S: AsRef<str>, T: AsRef<str>>(
    id: &str,
    source_corpus: SourceCorpus,
    rows: &[(S, T)],
    mode: BioMode,
    first_line: usize,
) -> Result<Parsed<LabeledDocument>> {
    let mut tags = Vec::with_capacity(rows.len());
    for (i, (tok, tag)) in rows.iter().enumerate() {
        let line = first_line + i;
        if tok.as_ref().is_empty() || tok.as_ref().chars().any(char::is_whitespace) {
            return Err(Error::parse(line, format!("token `{}` is empty or contains whitespace", tok.as_ref())));
        }
        let tag: BioTag = tag.as_ref().trim().parse().map_err(|e: String| Error::parse(line, e))?;
        tags.push(tag);
    }
    let (spans, repairs) = bio_to_spans(&tags, mode).map_err(|r| {
        Error::parse(
            first_line + r.token,
            format!("{} does not continue a component of the same type", r.found),
        )
    })?;
    let warnings = repairs
        .iter()
        .map(|r| {
            Warning::new(
                Some(first_line + r.token),
                format!("{} without a preceding begin tag; read as {}", r.found, r.replaced_with),
            )
        })
        .collect();
    let words: Vec<&str> = rows.iter().map(|(t, _)| t.as_ref()).collect();
    let (text, tokens) = detokenize(&words);
    let value = LabeledDocument::new(id, source_corpus, text, tokens, spans)?;
    Ok(Parsed { value, warnings })
}

/// Parses a whole table file. Documents are numbered `{id_prefix}-{n}`
/// starting at 0.
pub fn parse_token_table_file(
    id_prefix: &str,
    source_corpus: SourceCorpus,
    content: &str,
    mode: BioMode,
) -> Result<Parsed<Vec<LabeledDocument>>> {
    let mut docs = Vec::new();
    let mut warnings = Vec::new();
    let mut rows: Vec<(String, String)> = Vec::new();
    let mut first_line = 1;

    let mut flush = |rows: &mut Vec<(String, String)>, first_line: usize| -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let id = format!("{id_prefix}-{}", docs.len());
        let parsed = parse_rows(&id, source_corpus, rows, mode, first_line)?;
        warnings.extend(parsed.warnings);
        docs.push(parsed.value);
        rows.clear();
        Ok(())
    };

    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            flush(&mut rows, first_line)?;
            continue;
        }
        if rows.is_empty() {
            first_line = line_no;
        }
        let mut cols = line.split('\t');
        let (Some(tok), Some(tag), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::parse(line_no, "expected exactly two tab-separated columns"));
        };
        rows.push((tok.to_string(), tag.to_string()));
    }
    flush(&mut rows, first_line)?;
    Ok(Parsed { value: docs, warnings })
}
