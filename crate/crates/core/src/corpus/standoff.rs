//! Standoff (brat-style) annotation ingestion.
//!
//! Only text-bound lines (`T<n>\t<type> <start> <end>\t<surface>`) carry
//! components. Relation, attribute and note lines are skipped.

use super::{snap_to_tokens, tokenize, ComponentSpan, ComponentType, LabeledDocument, Parsed, SourceCorpus, Warning};
use crate::error::{Error, Result};

/// Maps a source-corpus annotation type onto the two-type scheme.
pub fn map_annotation_type(label: &str) -> Option<ComponentType> {
    let base = label.split(':').next().unwrap_or(label).to_ascii_lowercase();
    match base.as_str() {
        "majorclaim" | "claim" => Some(ComponentType::Claim),
        "premise" | "evidence" | "backing" | "grounds" => Some(ComponentType::Premise),
        _ => None,
    }
}

struct TextBound {
    line: usize,
    label: String,
    start: usize,
    end: usize,
}

fn parse_text_bound(line_no: usize, line: &str) -> Result<Option<TextBound>> {
    let mut fields = line.split('\t');
    let id = fields.next().unwrap_or_default();
    let Some(body) = fields.next() else {
        return Err(Error::parse(line_no, "expected tab-separated annotation fields"));
    };
    if id.is_empty() {
        return Err(Error::parse(line_no, "missing annotation id"));
    }
    if !id.starts_with('T') {
        return Ok(None);
    }
    let mut parts = body.split(' ');
    let label = parts.next().filter(|l| !l.is_empty()).ok_or_else(|| Error::parse(line_no, "missing annotation type"))?;
    let offsets: Vec<&str> = parts.collect();
    if offsets.is_empty() {
        return Err(Error::parse(line_no, "missing character offsets"));
    }
    // Discontinuous annotations (`0 5;9 12`) are covered by their hull.
    let mut start = usize::MAX;
    let mut end = 0usize;
    for fragment in offsets.join(" ").split(';') {
        let nums: Vec<&str> = fragment.split_whitespace().collect();
        let [s, e] = nums[..] else {
            return Err(Error::parse(line_no, format!("bad offset fragment `{fragment}`")));
        };
        let s: usize = s.parse().map_err(|_| Error::parse(line_no, format!("bad start offset `{s}`")))?;
        let e: usize = e.parse().map_err(|_| Error::parse(line_no, format!("bad end offset `{e}`")))?;
        if s > e {
            return Err(Error::parse(line_no, format!("start {s} after end {e}")));
        }
        start = start.min(s);
        end = end.max(e);
    }
    Ok(Some(TextBound {
        line: line_no,
        label: label.to_string(),
        start,
        end,
    }))
}

/// Builds a document from a text file and its standoff annotation file.
pub fn parse_standoff(
    id: &str,
    source_corpus: SourceCorpus,
    text: &str,
    annotations: &str,
) -> Result<Parsed<LabeledDocument>> {
    let n_chars = text.chars().count();
    let tokens = tokenize(text);
    let mut warnings = Vec::new();
    let mut candidates = Vec::new();

    for (idx, raw) in annotations.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let Some(tb) = parse_text_bound(line_no, raw)? else {
            continue;
        };
        if tb.end > n_chars {
            return Err(Error::Range {
                offset: tb.end,
                len: n_chars,
            });
        }
        let Some(kind) = map_annotation_type(&tb.label) else {
            warnings.push(Warning::new(
                Some(tb.line),
                format!("annotation type `{}` is neither claim nor premise; dropped", tb.label),
            ));
            continue;
        };
        match snap_to_tokens(&tokens, tb.start, tb.end) {
            None => warnings.push(Warning::new(Some(tb.line), "annotation covers no token; dropped")),
            Some((first, last, widened)) => {
                if widened {
                    warnings.push(Warning::new(
                        Some(tb.line),
                        format!(
                            "offsets {}..{} cut a token; widened to {}..{}",
                            tb.start, tb.end, tokens[first].start, tokens[last].end
                        ),
                    ));
                }
                candidates.push((tb.line, ComponentSpan::new(first, last, kind)));
            }
        }
    }

    candidates.sort_by_key(|(_, s)| (s.start_token, std::cmp::Reverse(s.end_token)));
    let mut spans: Vec<ComponentSpan> = Vec::with_capacity(candidates.len());
    for (line, span) in candidates {
        if let Some(prev) = spans.last() {
            if span.start_token <= prev.end_token {
                warnings.push(Warning::new(Some(line), "annotation overlaps an earlier component; dropped"));
                continue;
            }
        }
        spans.push(span);
    }

    let value = LabeledDocument::new(id, source_corpus, text, tokens, spans)?;
    Ok(Parsed { value, warnings })
}
