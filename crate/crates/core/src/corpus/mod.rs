//! Canonical document model for argument-annotated corpora, plus ingestion,
//! statistics, merging and splitting.
//!
//! All offsets are character (Unicode scalar) offsets, never byte offsets, so
//! that interchange files stay valid regardless of encoding details.

mod interchange;
mod load;
mod split;
mod standoff;
mod stats;
mod table;
mod tokenize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use interchange::{read_canonical, read_canonical_file, write_canonical, write_canonical_file, CanonicalRecord, CanonicalSpan};
pub use load::{load_input, FileError, InputFormat, LoadOutcome};
pub use split::{split, split_sizes, Split, SplitRatios};
pub use standoff::{map_annotation_type, parse_standoff};
pub use stats::{corpus_stats, stats_by_source, CorpusStats};
pub use table::{detokenize, parse_token_table, parse_token_table_file, BioMode};
pub use tokenize::{char_to_byte_offsets, tokenize, Token};

/// The two argumentative component types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentType {
    Claim,
    Premise,
}

impl ComponentType {
    pub const ALL: [ComponentType; 2] = [ComponentType::Claim, ComponentType::Premise];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentType::Claim => "Claim",
            ComponentType::Premise => "Premise",
        }
    }

    /// Lowercase XML tag name.
    pub fn tag_name(self) -> &'static str {
        match self {
            ComponentType::Claim => "claim",
            ComponentType::Premise => "premise",
        }
    }

    pub fn begin(self) -> BioTag {
        match self {
            ComponentType::Claim => BioTag::BClaim,
            ComponentType::Premise => BioTag::BPremise,
        }
    }

    pub fn inside(self) -> BioTag {
        match self {
            ComponentType::Claim => BioTag::IClaim,
            ComponentType::Premise => BioTag::IPremise,
        }
    }
}

impl fmt::Display for ComponentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which public corpus a document came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceCorpus {
    USElecDeb60To16,
    PersuasiveEssays,
    WebDiscourse,
    Synthetic,
}

impl SourceCorpus {
    pub const ALL: [SourceCorpus; 4] = [
        SourceCorpus::USElecDeb60To16,
        SourceCorpus::PersuasiveEssays,
        SourceCorpus::WebDiscourse,
        SourceCorpus::Synthetic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceCorpus::USElecDeb60To16 => "USElecDeb60To16",
            SourceCorpus::PersuasiveEssays => "PersuasiveEssays",
            SourceCorpus::WebDiscourse => "WebDiscourse",
            SourceCorpus::Synthetic => "Synthetic",
        }
    }
}

impl fmt::Display for SourceCorpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceCorpus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SourceCorpus::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown source corpus `{s}`")))
    }
}

/// Token-level BIO label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioTag {
    BClaim,
    IClaim,
    BPremise,
    IPremise,
    O,
}

impl BioTag {
    /// Column order used by every report: B-C, I-C, B-P, I-P, O.
    pub const ALL: [BioTag; 5] = [
        BioTag::BClaim,
        BioTag::IClaim,
        BioTag::BPremise,
        BioTag::IPremise,
        BioTag::O,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BioTag::BClaim => "B-Claim",
            BioTag::IClaim => "I-Claim",
            BioTag::BPremise => "B-Premise",
            BioTag::IPremise => "I-Premise",
            BioTag::O => "O",
        }
    }

    /// Short column header (`B-C`, `I-P`, ...).
    pub fn short(self) -> &'static str {
        match self {
            BioTag::BClaim => "B-C",
            BioTag::IClaim => "I-C",
            BioTag::BPremise => "B-P",
            BioTag::IPremise => "I-P",
            BioTag::O => "O",
        }
    }

    pub fn kind(self) -> Option<ComponentType> {
        match self {
            BioTag::BClaim | BioTag::IClaim => Some(ComponentType::Claim),
            BioTag::BPremise | BioTag::IPremise => Some(ComponentType::Premise),
            BioTag::O => None,
        }
    }

    pub fn is_begin(self) -> bool {
        matches!(self, BioTag::BClaim | BioTag::BPremise)
    }

    pub fn is_inside(self) -> bool {
        matches!(self, BioTag::IClaim | BioTag::IPremise)
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BioTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        BioTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown BIO tag `{s}`"))
    }
}

impl Serialize for BioTag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for BioTag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A typed component over an inclusive token interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentSpan {
    pub start_token: usize,
    /// Inclusive.
    pub end_token: usize,
    pub kind: ComponentType,
}

impl ComponentSpan {
    pub fn new(start_token: usize, end_token: usize, kind: ComponentType) -> Self {
        Self {
            start_token,
            end_token,
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.end_token + 1 - self.start_token
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, token: usize) -> bool {
        self.start_token <= token && token <= self.end_token
    }

    pub fn overlap(&self, other: &ComponentSpan) -> usize {
        let lo = self.start_token.max(other.start_token);
        let hi = self.end_token.min(other.end_token);
        if lo <= hi {
            hi + 1 - lo
        } else {
            0
        }
    }
}

/// Checks that spans are sorted, in range and pairwise disjoint.
pub fn validate_spans(spans: &[ComponentSpan], n_tokens: usize) -> std::result::Result<(), String> {
    let mut next_free = 0usize;
    for (i, span) in spans.iter().enumerate() {
        if span.start_token > span.end_token {
            return Err(format!("span {i} has start {} after end {}", span.start_token, span.end_token));
        }
        if span.end_token >= n_tokens {
            return Err(format!("span {i} ends at token {} but there are {n_tokens} tokens", span.end_token));
        }
        if span.start_token < next_free {
            return Err(format!("span {i} overlaps or precedes the previous span"));
        }
        next_free = span.end_token + 1;
    }
    Ok(())
}

/// A document with its tokenization and non-overlapping component spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDocument {
    pub id: String,
    pub source_corpus: SourceCorpus,
    pub text: String,
    pub tokens: Vec<Token>,
    pub spans: Vec<ComponentSpan>,
}

impl LabeledDocument {
    /// Builds a document and checks the token and span invariants.
    pub fn new(
        id: impl Into<String>,
        source_corpus: SourceCorpus,
        text: impl Into<String>,
        tokens: Vec<Token>,
        spans: Vec<ComponentSpan>,
    ) -> Result<Self> {
        let doc = Self {
            id: id.into(),
            source_corpus,
            text: text.into(),
            tokens,
            spans,
        };
        doc.validate()?;
        Ok(doc)
    }

    /// Tokenizes `text` with the default tokenizer and attaches `spans`.
    pub fn from_text(
        id: impl Into<String>,
        source_corpus: SourceCorpus,
        text: impl Into<String>,
        spans: Vec<ComponentSpan>,
    ) -> Result<Self> {
        let text = text.into();
        let tokens = tokenize(&text);
        Self::new(id, source_corpus, text, tokens, spans)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidDocument {
            id: self.id.clone(),
            message,
        };
        let offsets = char_to_byte_offsets(&self.text);
        let n_chars = offsets.len() - 1;
        let mut prev_end = 0usize;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.text.is_empty() {
                return Err(invalid(format!("token {i} is empty")));
            }
            if tok.start >= tok.end || tok.end > n_chars {
                return Err(invalid(format!("token {i} has bad offsets {}..{}", tok.start, tok.end)));
            }
            if i > 0 && tok.start < prev_end {
                return Err(invalid(format!("token {i} overlaps its predecessor")));
            }
            if self.text[offsets[tok.start]..offsets[tok.end]] != tok.text {
                return Err(invalid(format!("token {i} text does not match the document text")));
            }
            prev_end = tok.end;
        }
        validate_spans(&self.spans, self.tokens.len()).map_err(invalid)
    }

    /// BIO expansion of the spans over the tokens.
    pub fn bio_tags(&self) -> Vec<BioTag> {
        spans_to_bio(&self.spans, self.tokens.len())
    }

    /// Character extent `[start, end)` of a span.
    pub fn span_chars(&self, span: &ComponentSpan) -> (usize, usize) {
        (self.tokens[span.start_token].start, self.tokens[span.end_token].end)
    }

    pub fn span_count(&self, kind: ComponentType) -> usize {
        self.spans.iter().filter(|s| s.kind == kind).count()
    }
}

/// Expands spans into one BIO tag per token.
pub fn spans_to_bio(spans: &[ComponentSpan], n_tokens: usize) -> Vec<BioTag> {
    let mut tags = vec![BioTag::O; n_tokens];
    for span in spans {
        tags[span.start_token] = span.kind.begin();
        for tag in &mut tags[span.start_token + 1..=span.end_token] {
            *tag = span.kind.inside();
        }
    }
    tags
}

/// A BIO scheme violation that lenient decoding repaired.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BioRepair {
    pub token: usize,
    pub found: BioTag,
    pub replaced_with: BioTag,
}

/// Collapses a BIO sequence into spans.
///
/// An `I-x` that does not continue a run of the same kind is an error in
/// strict mode and is treated as `B-x` in lenient mode.
pub fn bio_to_spans(tags: &[BioTag], mode: BioMode) -> std::result::Result<(Vec<ComponentSpan>, Vec<BioRepair>), BioRepair> {
    let mut spans: Vec<ComponentSpan> = Vec::new();
    let mut repairs = Vec::new();
    let mut open: Option<ComponentSpan> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            BioTag::O => spans.extend(open.take()),
            t if t.is_begin() => {
                spans.extend(open.take());
                open = Some(ComponentSpan::new(i, i, t.kind().unwrap()));
            }
            t => {
                let kind = t.kind().unwrap();
                match open.as_mut() {
                    Some(span) if span.kind == kind => span.end_token = i,
                    _ => {
                        let repair = BioRepair {
                            token: i,
                            found: t,
                            replaced_with: kind.begin(),
                        };
                        if mode == BioMode::Strict {
                            return Err(repair);
                        }
                        repairs.push(repair);
                        spans.extend(open.take());
                        open = Some(ComponentSpan::new(i, i, kind));
                    }
                }
            }
        }
    }
    spans.extend(open);
    Ok((spans, repairs))
}

/// True iff every `I-x` continues a `B-x`/`I-x` of the same kind.
pub fn is_valid_bio(tags: &[BioTag]) -> bool {
    bio_to_spans(tags, BioMode::Strict).is_ok()
}

/// A non-fatal ingestion finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub line: Option<usize>,
    pub message: String,
}

impl Warning {
    pub(crate) fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        let warning = Self {
            line,
            message: message.into(),
        };
        log::warn!("{}", warning);
        warning
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// A parsed value plus the warnings produced on the way.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

/// Concatenates corpora, rejecting collisions on `(source_corpus, id)`.
pub fn merge_corpora(corpora: Vec<Vec<LabeledDocument>>) -> Result<Vec<LabeledDocument>> {
    let mut seen = std::collections::HashSet::new();
    let mut merged = Vec::with_capacity(corpora.iter().map(Vec::len).sum());
    for corpus in corpora {
        for doc in corpus {
            if !seen.insert((doc.source_corpus, doc.id.clone())) {
                return Err(Error::DuplicateId(format!("{}/{}", doc.source_corpus, doc.id)));
            }
            merged.push(doc);
        }
    }
    Ok(merged)
}

/// Maps a character range onto the tokens it touches.
///
/// Returns the inclusive token interval and whether the range had to be
/// widened because it cut through a token. `None` when no token overlaps.
pub fn snap_to_tokens(tokens: &[Token], start: usize, end: usize) -> Option<(usize, usize, bool)> {
    let first = tokens.partition_point(|t| t.end <= start);
    if first >= tokens.len() || tokens[first].start >= end {
        return None;
    }
    let last = tokens.partition_point(|t| t.start < end) - 1;
    let widened = tokens[first].start < start || tokens[last].end > end;
    Some((first, last, widened))
}
