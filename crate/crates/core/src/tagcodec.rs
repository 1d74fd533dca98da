//! Inline `<claim>`/`<premise>` markup: encoding documents and decoding
//! (possibly malformed) generated text back into plain text and spans.
//!
//! The dialect is exactly two lowercase tags with no attributes. On input,
//! tag names match case-insensitively and whitespace inside the angle
//! brackets is tolerated (`< /Claim >`). Anything else that looks like a tag
//! (`<claims>`, `<b>`) is literal text.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    char_to_byte_offsets, snap_to_tokens, tokenize, validate_spans, ComponentSpan, ComponentType, LabeledDocument, SourceCorpus, Token,
};
use crate::error::{Error, Result};

/// Document text with inline component markers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaggedText(pub String);

impl TaggedText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for TaggedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagRole {
    Open,
    Close,
}

/// One recognized tag in the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagEvent {
    pub kind: ComponentType,
    pub role: TagRole,
    /// Character position of the `<`.
    pub position: usize,
    /// Length of the tag in characters.
    pub len: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Strict,
    #[default]
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RepairKind {
    /// An open tag was never closed; the component ends at end of text.
    Unclosed,
    /// A closing tag without a matching open tag was dropped.
    UnopenedClose,
    /// An open tag appeared inside another component, which was closed there.
    NestedOpen,
    /// A closing tag named the other type; it closed the open component.
    MismatchedClose,
    /// A component contained no token and was dropped.
    EmptySpan,
    /// A tag fell inside a token; the component was widened to whole tokens.
    TokenSplit,
    /// After widening, a component shared tokens with its predecessor and was trimmed or dropped.
    OverlapTrimmed,
}

impl RepairKind {
    fn describe(self) -> &'static str {
        match self {
            RepairKind::Unclosed => "unclosed tag",
            RepairKind::UnopenedClose => "closing tag without open tag",
            RepairKind::NestedOpen => "nested or crossing open tag",
            RepairKind::MismatchedClose => "closing tag of the wrong type",
            RepairKind::EmptySpan => "component covers no token",
            RepairKind::TokenSplit => "tag splits a token",
            RepairKind::OverlapTrimmed => "component overlaps its predecessor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repair {
    pub kind: RepairKind,
    /// Character position in the tagged input.
    pub position: usize,
}

/// Result of decoding tagged text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutcome {
    pub plain_text: String,
    pub tokens: Vec<Token>,
    pub spans: Vec<ComponentSpan>,
    pub repairs: Vec<Repair>,
}

impl ParseOutcome {
    pub fn span_chars(&self, span: &ComponentSpan) -> (usize, usize) {
        (self.tokens[span.start_token].start, self.tokens[span.end_token].end)
    }

    pub fn into_document(self, id: impl Into<String>, source_corpus: SourceCorpus) -> Result<LabeledDocument> {
        LabeledDocument::new(id, source_corpus, self.plain_text, self.tokens, self.spans)
    }
}

fn match_tag(chars: &[char], at: usize) -> Option<(ComponentType, TagRole, usize)> {
    debug_assert_eq!(chars[at], '<');
    let mut i = at + 1;
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    skip_ws(&mut i);
    let role = if chars.get(i) == Some(&'/') {
        i += 1;
        skip_ws(&mut i);
        TagRole::Close
    } else {
        TagRole::Open
    };
    let name_start = i;
    while i < chars.len() && chars[i].is_ascii_alphabetic() {
        i += 1;
    }
    let name: String = chars[name_start..i].iter().collect::<String>().to_ascii_lowercase();
    let kind = match name.as_str() {
        "claim" => ComponentType::Claim,
        "premise" => ComponentType::Premise,
        _ => return None,
    };
    skip_ws(&mut i);
    (chars.get(i) == Some(&'>')).then_some((kind, role, i + 1 - at))
}

fn scan(chars: &[char]) -> Vec<TagEvent> {
    let mut events = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' {
            if let Some((kind, role, len)) = match_tag(chars, i) {
                events.push(TagEvent {
                    kind,
                    role,
                    position: i,
                    len,
                });
                i += len;
                continue;
            }
        }
        i += 1;
    }
    events
}

/// Lexes recognized tags without interpreting their nesting.
pub fn tag_skeleton(tagged: &str) -> Vec<TagEvent> {
    let chars: Vec<char> = tagged.chars().collect();
    scan(&chars)
}

/// Removes every recognized tag.
pub fn strip_tags(tagged: &str) -> String {
    let chars: Vec<char> = tagged.chars().collect();
    let mut out = String::with_capacity(tagged.len());
    let mut next = 0;
    for ev in scan(&chars) {
        out.extend(&chars[next..ev.position]);
        next = ev.position + ev.len;
    }
    out.extend(&chars[next..]);
    out
}

/// Inserts tags at the character boundaries of each span. Text that already
/// contains something the decoder would read as a tag is rejected.
pub fn encode_spans(text: &str, tokens: &[Token], spans: &[ComponentSpan]) -> Result<TaggedText> {
    validate_spans(spans, tokens.len()).map_err(|message| Error::InvalidDocument {
        id: String::new(),
        message,
    })?;
    if let Some(ev) = tag_skeleton(text).first() {
        return Err(Error::InvalidDocument {
            id: String::new(),
            message: format!("text already contains tag markup at character {}", ev.position),
        });
    }
    let offsets = char_to_byte_offsets(text);
    let mut out = String::with_capacity(text.len() + spans.len() * 20);
    let mut cursor = 0usize;
    for span in spans {
        let start = offsets[tokens[span.start_token].start];
        let end = offsets[tokens[span.end_token].end];
        let name = span.kind.tag_name();
        out.push_str(&text[cursor..start]);
        out.push('<');
        out.push_str(name);
        out.push('>');
        out.push_str(&text[start..end]);
        out.push_str("</");
        out.push_str(name);
        out.push('>');
        cursor = end;
    }
    out.push_str(&text[cursor..]);
    Ok(TaggedText(out))
}

pub fn encode_xml(doc: &LabeledDocument) -> Result<TaggedText> {
    encode_spans(&doc.text, &doc.tokens, &doc.spans).map_err(|e| match e {
        Error::InvalidDocument { message, .. } => Error::InvalidDocument {
            id: doc.id.clone(),
            message,
        },
        other => other,
    })
}

struct Decoder {
    mode: DecodeMode,
    repairs: Vec<Repair>,
}

impl Decoder {
    fn fault(&mut self, kind: RepairKind, position: usize) -> Result<()> {
        match self.mode {
            DecodeMode::Strict => Err(Error::MalformedTags {
                position,
                message: kind.describe().to_string(),
            }),
            DecodeMode::Lenient => {
                self.repairs.push(Repair { kind, position });
                Ok(())
            }
        }
    }
}

/// Parses tagged text into plain text plus token spans.
///
/// Strict mode fails on the first malformation. Lenient mode never fails and
/// records every repair it made.
pub fn decode_xml(tagged: &str, mode: DecodeMode) -> Result<ParseOutcome> {
    let chars: Vec<char> = tagged.chars().collect();
    let events = scan(&chars);
    let mut dec = Decoder {
        mode,
        repairs: Vec::new(),
    };

    // (kind, plain start, plain end, tagged position of the open tag)
    let mut char_spans: Vec<(ComponentType, usize, usize, usize)> = Vec::new();
    let mut plain = String::with_capacity(tagged.len());
    let mut plain_len = 0usize;
    let mut open: Option<(ComponentType, usize, usize)> = None;
    let mut next = 0usize;

    for ev in &events {
        plain.extend(&chars[next..ev.position]);
        plain_len += ev.position - next;
        next = ev.position + ev.len;
        match (ev.role, open) {
            (TagRole::Open, None) => open = Some((ev.kind, plain_len, ev.position)),
            (TagRole::Open, Some((kind, start, at))) => {
                dec.fault(RepairKind::NestedOpen, ev.position)?;
                char_spans.push((kind, start, plain_len, at));
                open = Some((ev.kind, plain_len, ev.position));
            }
            (TagRole::Close, None) => dec.fault(RepairKind::UnopenedClose, ev.position)?,
            (TagRole::Close, Some((kind, start, at))) => {
                if kind != ev.kind {
                    dec.fault(RepairKind::MismatchedClose, ev.position)?;
                }
                char_spans.push((kind, start, plain_len, at));
                open = None;
            }
        }
    }
    plain.extend(&chars[next..]);
    plain_len += chars.len() - next;
    if let Some((kind, start, at)) = open {
        dec.fault(RepairKind::Unclosed, at)?;
        char_spans.push((kind, start, plain_len, at));
    }

    let tokens = tokenize(&plain);
    let mut spans: Vec<ComponentSpan> = Vec::with_capacity(char_spans.len());
    for (kind, start, end, at) in char_spans {
        let Some((mut first, last, widened)) = snap_to_tokens(&tokens, start, end) else {
            dec.fault(RepairKind::EmptySpan, at)?;
            continue;
        };
        if widened {
            dec.fault(RepairKind::TokenSplit, at)?;
        }
        if let Some(prev) = spans.last() {
            if first <= prev.end_token {
                dec.fault(RepairKind::OverlapTrimmed, at)?;
                first = prev.end_token + 1;
                if first > last {
                    continue;
                }
            }
        }
        spans.push(ComponentSpan::new(first, last, kind));
    }

    Ok(ParseOutcome {
        plain_text: plain,
        tokens,
        spans,
        repairs: dec.repairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ComponentType::{Claim, Premise};

    fn span_texts(out: &ParseOutcome) -> Vec<(ComponentType, String)> {
        out.spans
            .iter()
            .map(|s| {
                let (a, b) = out.span_chars(s);
                (s.kind, out.plain_text.chars().skip(a).take(b - a).collect())
            })
            .collect()
    }

    #[test]
    fn skeleton_examples() {
        assert!(tag_skeleton("").is_empty());
        let ev = tag_skeleton("<premise></premise>");
        assert_eq!(
            ev.iter().map(|e| (e.kind, e.role, e.position)).collect::<Vec<_>>(),
            [(Premise, TagRole::Open, 0), (Premise, TagRole::Close, 9)]
        );
        let ev = tag_skeleton("a <claim> b");
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].kind, ev[0].role, ev[0].position), (Claim, TagRole::Open, 2));
    }

    #[test]
    fn skeleton_tolerates_case_and_whitespace_but_not_other_names() {
        let ev = tag_skeleton("<Claim >x< / CLAIM> <claims> <b>");
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[1].len, 10);
        assert_eq!(strip_tags("<Claim >x< / CLAIM> <claims>"), "x <claims>");
    }

    #[test]
    fn no_tags() {
        let out = decode_xml("no tags here", DecodeMode::Strict).unwrap();
        assert_eq!(out.plain_text, "no tags here");
        assert!(out.spans.is_empty() && out.repairs.is_empty());
    }

    #[test]
    fn two_spans() {
        let out = decode_xml("<claim>A</claim> b <premise>c</premise>", DecodeMode::Strict).unwrap();
        assert_eq!(out.plain_text, "A b c");
        assert_eq!(span_texts(&out), [(Claim, "A".into()), (Premise, "c".into())]);
    }

    #[test]
    fn encode_zero_spans_is_identity() {
        let doc = LabeledDocument::from_text("d", SourceCorpus::Synthetic, "plain  text.", vec![]).unwrap();
        assert_eq!(encode_xml(&doc).unwrap().as_str(), "plain  text.");
    }

    #[test]
    fn encode_rejects_overlap() {
        let mut doc = LabeledDocument::from_text("d", SourceCorpus::Synthetic, "a b c", vec![]).unwrap();
        doc.spans = vec![ComponentSpan::new(0, 1, Claim), ComponentSpan::new(1, 2, Premise)];
        assert!(matches!(encode_xml(&doc), Err(Error::InvalidDocument { id, .. }) if id == "d"));
    }

    /// Every single-fault input, with the expected lenient recovery.
    #[test]
    fn encode_rejects_text_with_tag_markup() {
        let doc = LabeledDocument::from_text("d", SourceCorpus::Synthetic, "a < Claim > b", vec![]).unwrap();
        assert!(encode_xml(&doc).is_err());
        let doc = LabeledDocument::from_text("d", SourceCorpus::Synthetic, "a <3 b </ c", vec![]).unwrap();
        assert_eq!(encode_xml(&doc).unwrap().as_str(), "a <3 b </ c");
    }

    #[test]
    fn single_fault_recovery_table() {
        type Row = (&'static str, &'static str, &'static [(ComponentType, &'static str)], &'static [(RepairKind, usize)]);
        let table: &[Row] = &[
            ("<claim>A b", "A b", &[(Claim, "A b")], &[(RepairKind::Unclosed, 0)]),
            ("A b</claim> c", "A b c", &[], &[(RepairKind::UnopenedClose, 3)]),
            (
                "<claim>a <premise>b</premise> c</claim>",
                "a b c",
                &[(Claim, "a"), (Premise, "b")],
                &[(RepairKind::NestedOpen, 9), (RepairKind::UnopenedClose, 31)],
            ),
            ("<claim>a b</premise> c", "a b c", &[(Claim, "a b")], &[(RepairKind::MismatchedClose, 10)]),
            ("x <claim></claim> y", "x  y", &[], &[(RepairKind::EmptySpan, 2)]),
            ("x <premise> </premise> y", "x   y", &[], &[(RepairKind::EmptySpan, 2)]),
            ("Pri<claim>ces rose</claim>", "Prices rose", &[(Claim, "Prices rose")], &[(RepairKind::TokenSplit, 3)]),
        ];
        for (input, plain, spans, repairs) in table {
            let out = decode_xml(input, DecodeMode::Lenient).unwrap();
            assert_eq!(out.plain_text, *plain, "{input}");
            let expected: Vec<(ComponentType, String)> = spans.iter().map(|(k, s)| (*k, s.to_string())).collect();
            assert_eq!(span_texts(&out), expected, "{input}");
            let got: Vec<(RepairKind, usize)> = out.repairs.iter().map(|r| (r.kind, r.position)).collect();
            assert_eq!(got, *repairs, "{input}");

            let err = decode_xml(input, DecodeMode::Strict).unwrap_err();
            assert!(
                matches!(err, Error::MalformedTags { position, .. } if position == repairs[0].1),
                "{input}: {err}"
            );
        }
    }

    #[test]
    fn split_tokens_overlap_is_trimmed() {
        // "ab" is one token; both tags cut it.
        let out = decode_xml("<claim>a</claim><premise>b c</premise>", DecodeMode::Lenient).unwrap();
        assert_eq!(out.plain_text, "ab c");
        assert_eq!(span_texts(&out), [(Claim, "ab".into()), (Premise, "c".into())]);
        assert!(out.repairs.iter().any(|r| r.kind == RepairKind::OverlapTrimmed));
    }

    #[test]
    fn whitespace_inside_tags_is_span_text() {
        let out = decode_xml("x<claim> a b </claim>y", DecodeMode::Strict).unwrap();
        assert_eq!(out.plain_text, "x a b y");
        assert_eq!(span_texts(&out), [(Claim, "a b".into())]);
    }
}
