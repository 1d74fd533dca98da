//! Prompt templates, context-budget chunking and instruction-tuning export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{char_to_byte_offsets, ComponentSpan, LabeledDocument, Token};
use crate::error::{Error, Result};
use crate::tagcodec::{encode_xml, TaggedText};

pub const DEFAULT_PLACEHOLDER: &str = "{input}";
const FORMAT_MARKER: &str = "{format}";

const V1_INSTRUCTION: &str = "\
Identify the argumentative components in the text below.

There are two kinds of components:
- A claim is a statement asserting a position, opinion or proposition that can be supported or contested.
- A premise is a statement that gives justification, evidence or reasoning for a claim or for another premise, such as statistics, expert testimony, facts, anecdotes or examples.

Reproduce the input text verbatim. Do not add, remove, reorder or change any word or punctuation mark; only insert tags.
{format}

Text:
{input}

Tagged text:
";

const V1_FORMAT: &str = "Wrap every claim in <claim>...</claim> and every premise in <premise>...</premise>. Tags must not nest or overlap. Leave non-argumentative text untagged.";

/// An instruction with exactly one input placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction_text: String,
    /// Substituted for a `{format}` marker in the instruction, if present.
    pub format_clause: String,
    pub version_id: String,
    #[serde(default = "default_placeholder")]
    pub placeholder: String,
}

fn default_placeholder() -> String {
    DEFAULT_PLACEHOLDER.to_string()
}

impl PromptTemplate {
    pub fn new(instruction_text: impl Into<String>, format_clause: impl Into<String>, version_id: impl Into<String>) -> Result<Self> {
        Self::with_placeholder(instruction_text, format_clause, version_id, DEFAULT_PLACEHOLDER)
    }

    pub fn with_placeholder(
        instruction_text: impl Into<String>,
        format_clause: impl Into<String>,
        version_id: impl Into<String>,
        placeholder: impl Into<String>,
    ) -> Result<Self> {
        let template = Self {
            instruction_text: instruction_text.into(),
            format_clause: format_clause.into(),
            version_id: version_id.into(),
            placeholder: placeholder.into(),
        };
        template.validate()?;
        Ok(template)
    }

    /// The built-in template, version `v1`.
    pub fn v1() -> Self {
        Self::new(V1_INSTRUCTION, V1_FORMAT, "v1").expect("built-in template is valid")
    }

    /// Looks up a built-in template by version.
    pub fn builtin(version: &str) -> Result<Self> {
        match version {
            "v1" => Ok(Self::v1()),
            other => Err(Error::Template(format!("no built-in template `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.placeholder.is_empty() {
            return Err(Error::Template("placeholder is empty".into()));
        }
        let expanded = self.instruction_text.replace(FORMAT_MARKER, &self.format_clause);
        let count = expanded.matches(&self.placeholder).count();
        if count != 1 {
            return Err(Error::Template(format!(
                "expected exactly one `{}` placeholder, found {count}",
                self.placeholder
            )));
        }
        Ok(())
    }

    /// Text before and after the input once the format clause is expanded.
    pub fn frame(&self) -> (String, String) {
        let expanded = self.instruction_text.replace(FORMAT_MARKER, &self.format_clause);
        let (prefix, suffix) = expanded.split_once(&self.placeholder).expect("validated template");
        (prefix.to_string(), suffix.to_string())
    }

    pub fn render(&self, input: &str) -> String {
        let (prefix, suffix) = self.frame();
        let mut out = String::with_capacity(prefix.len() + input.len() + suffix.len());
        out.push_str(&prefix);
        out.push_str(input);
        out.push_str(&suffix);
        out
    }

    /// Recovers the input from a prompt rendered with this template.
    pub fn extract_input<'a>(&self, prompt: &'a str) -> Option<&'a str> {
        let (prefix, suffix) = self.frame();
        prompt.strip_prefix(prefix.as_str())?.strip_suffix(suffix.as_str())
    }
}

/// Context budget in toolkit tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkBudget {
    pub tokens: usize,
    /// Fraction of `tokens` actually used, leaving room for subword inflation.
    pub safety_factor: f64,
}

impl Default for ChunkBudget {
    fn default() -> Self {
        Self {
            tokens: 1024,
            safety_factor: 0.6,
        }
    }
}

impl ChunkBudget {
    pub fn exact(tokens: usize) -> Self {
        Self {
            tokens,
            safety_factor: 1.0,
        }
    }

    pub fn effective(&self) -> usize {
        ((self.tokens as f64 * self.safety_factor).floor() as usize).max(1)
    }
}

/// A contiguous run of whole sentences from one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub index: usize,
    /// Inclusive token interval in the source document.
    pub token_range: (usize, usize),
    pub text: String,
}

impl Chunk {
    pub fn token_count(&self) -> usize {
        self.token_range.1 + 1 - self.token_range.0
    }

    /// The chunk as a standalone document, with offsets rebased to the chunk
    /// text and the gold spans it contains.
    pub fn view(&self, doc: &LabeledDocument) -> LabeledDocument {
        let (first, last) = self.token_range;
        let base = doc.tokens[first].start;
        let tokens: Vec<Token> = doc.tokens[first..=last]
            .iter()
            .map(|t| Token::new(t.text.clone(), t.start - base, t.end - base))
            .collect();
        let spans: Vec<ComponentSpan> = doc
            .spans
            .iter()
            .filter(|s| s.start_token >= first && s.end_token <= last)
            .map(|s| ComponentSpan::new(s.start_token - first, s.end_token - first, s.kind))
            .collect();
        LabeledDocument {
            id: doc.id.clone(),
            source_corpus: doc.source_corpus,
            text: self.text.clone(),
            tokens,
            spans,
        }
    }
}

fn is_sentence_end(tokens: &[Token], i: usize) -> bool {
    let ends_in_mark = tokens[i].text.ends_with(['.', '!', '?']);
    let followed_by_gap = tokens.get(i + 1).is_none_or(|next| next.start > tokens[i].end);
    ends_in_mark && followed_by_gap
}

/// Token index just past the end of every sentence.
pub fn sentence_ends(tokens: &[Token]) -> Vec<usize> {
    let mut ends: Vec<usize> = (0..tokens.len()).filter(|&i| is_sentence_end(tokens, i)).map(|i| i + 1).collect();
    if ends.last() != Some(&tokens.len()) && !tokens.is_empty() {
        ends.push(tokens.len());
    }
    ends
}

/// Greedily packs whole sentences into chunks of at most
/// `budget.effective()` tokens. A sentence boundary that falls inside a gold
/// span is never used as a cut; the sentences it joins travel together.
pub fn chunk_document(doc: &LabeledDocument, budget: &ChunkBudget) -> Result<Vec<Chunk>> {
    let limit = budget.effective();
    let n = doc.tokens.len();
    let mut inside_span = vec![false; n + 1];
    for s in &doc.spans {
        inside_span[s.start_token + 1..=s.end_token].fill(true);
    }
    // Cut points usable as chunk boundaries.
    let cuts: Vec<usize> = sentence_ends(&doc.tokens).into_iter().filter(|&c| !inside_span[c]).collect();

    let mut chunks = Vec::new();
    let mut start = 0usize;
    let mut prev_cut = 0usize;
    for &cut in &cuts {
        if cut - start > limit {
            if prev_cut == start {
                // The unit [start, cut) alone is too long.
                let offending = doc.spans.iter().find(|s| s.start_token >= start && s.start_token < cut && s.len() > limit);
                let message = match offending {
                    Some(s) => format!("component of {} tokens exceeds the budget of {limit}", s.len()),
                    None => format!("sentence of {} tokens exceeds the budget of {limit}", cut - start),
                };
                return Err(Error::Chunking {
                    doc_id: doc.id.clone(),
                    offset: doc.tokens[start].start,
                    message,
                });
            }
            chunks.push(make_chunk(doc, chunks.len(), start, prev_cut));
            start = prev_cut;
            if cut - start > limit {
                return Err(Error::Chunking {
                    doc_id: doc.id.clone(),
                    offset: doc.tokens[start].start,
                    message: format!("sentence of {} tokens exceeds the budget of {limit}", cut - start),
                });
            }
        }
        prev_cut = cut;
    }
    if start < n {
        chunks.push(make_chunk(doc, chunks.len(), start, n));
    }
    Ok(chunks)
}

fn make_chunk(doc: &LabeledDocument, index: usize, start: usize, end: usize) -> Chunk {
    let offsets = char_to_byte_offsets(&doc.text);
    let text = doc.text[offsets[doc.tokens[start].start]..offsets[doc.tokens[end - 1].end]].to_string();
    Chunk {
        doc_id: doc.id.clone(),
        index,
        token_range: (start, end - 1),
        text,
    }
}

pub fn render_prompt(template: &PromptTemplate, chunk: &Chunk) -> String {
    template.render(&chunk.text)
}

/// One instruction-tuning example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub doc_id: String,
    pub chunk_index: usize,
    /// The full rendered prompt, identical to what inference sends.
    pub instruction: String,
    pub input: String,
    pub target: TaggedText,
    pub template_version: String,
}

pub fn export_training_pairs(corpus: &[LabeledDocument], template: &PromptTemplate, budget: &ChunkBudget) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    for doc in corpus {
        for chunk in chunk_document(doc, budget)? {
            let target = encode_xml(&chunk.view(doc))?;
            pairs.push(TrainingPair {
                doc_id: doc.id.clone(),
                chunk_index: chunk.index,
                instruction: render_prompt(template, &chunk),
                input: chunk.text,
                target,
                template_version: template.version_id.clone(),
            });
        }
    }
    Ok(pairs)
}

/// Writes pairs as JSON lines.
pub fn write_training_pairs<W: Write>(mut out: W, pairs: &[TrainingPair]) -> Result<()> {
    for pair in pairs {
        let line = serde_json::to_string(pair)?;
        writeln!(out, "{line}").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}
