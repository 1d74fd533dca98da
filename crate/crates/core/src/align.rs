//! Projection of generated tags back onto source tokens.
//!
//! A generation is decoded into plain text and spans, its tokens are aligned
//! to the source tokens with a weighted edit distance, and labels are carried
//! across Match/Substitute pairs. The alignment also feeds the discrepancy
//! taxonomy (type refinement, lexical adjustment, hallucination, discovery,
//! miss, boundary shift).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{bio_to_spans, BioMode, BioTag, ComponentSpan, ComponentType, LabeledDocument, Token};
use crate::error::Result;
use crate::tagcodec::{decode_xml, DecodeMode, Repair};

/// Costs are kept in quarter units so that ties compare exactly.
const UNIT: u32 = 4;
const NEAR_MATCH: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EditKind {
    Match,
    Substitute,
    Insert,
    Delete,
}

impl EditKind {
    fn code(self) -> char {
        match self {
            EditKind::Match => 'M',
            EditKind::Substitute => 'S',
            EditKind::Insert => 'I',
            EditKind::Delete => 'D',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOp {
    pub kind: EditKind,
    /// Absent for inserts.
    pub source: Option<usize>,
    /// Absent for deletes.
    pub generated: Option<usize>,
}

/// Case folding plus folding of typographic punctuation variants.
pub fn normalize(token: &str) -> String {
    token
        .chars()
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' | '`' | '\u{00B4}' => '\'',
            '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' | '\u{00AB}' | '\u{00BB}' => '"',
            '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2015}' | '\u{2212}' => '-',
            '\u{2026}' => '.',
            _ => c,
        })
        .flat_map(char::to_lowercase)
        .collect()
}

/// Whether the character edit distance is at most 1, in linear time.
fn within_one_edit(a: &[char], b: &[char]) -> bool {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if long.len() - short.len() > 1 {
        return false;
    }
    let prefix = short.iter().zip(long).take_while(|(x, y)| x == y).count();
    if short.len() == long.len() {
        short[prefix..].iter().skip(1).eq(long[prefix..].iter().skip(1))
    } else {
        short[prefix..] == long[prefix + 1..]
    }
}

/// Pairing cost in quarter units: 0 when equal after normalization, 1 for a
/// near match (raw edit distance 1), 4 otherwise.
pub fn pair_cost(source: &str, generated: &str) -> u32 {
    if source == generated || normalize(source) == normalize(generated) {
        0
    } else if within_one_edit(&source.chars().collect::<Vec<_>>(), &generated.chars().collect::<Vec<_>>()) {
        NEAR_MATCH
    } else {
        UNIT
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
    /// Total cost in quarter units.
    pub cost_units: u32,
}

impl Alignment {
    pub fn cost(&self) -> f64 {
        f64::from(self.cost_units) / f64::from(UNIT)
    }

    /// Run-length form, e.g. `12M1S3M1I`.
    pub fn compact(&self) -> String {
        let mut out = String::new();
        let mut iter = self.ops.iter().map(|o| o.kind).peekable();
        while let Some(kind) = iter.next() {
            let mut n = 1;
            while iter.peek() == Some(&kind) {
                iter.next();
                n += 1;
            }
            out.push_str(&n.to_string());
            out.push(kind.code());
        }
        out
    }

    pub fn count(&self, kind: EditKind) -> usize {
        self.ops.iter().filter(|o| o.kind == kind).count()
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (cost {})", self.compact(), self.cost())
    }
}

/// Minimum-cost global alignment.
///
/// Ties are broken left to right, preferring the diagonal (Match or
/// Substitute), then Delete, then Insert.
pub fn align_tokens<S: AsRef<str>, G: AsRef<str>>(source: &[S], generated: &[G]) -> Alignment {
    let n = source.len();
    let m = generated.len();
    let width = m + 1;
    // suffix[i * width + j]: optimal cost of aligning source[i..] with generated[j..]
    let mut suffix = vec![0u32; (n + 1) * width];
    let src_norm: Vec<String> = source.iter().map(|t| normalize(t.as_ref())).collect();
    let gen_norm: Vec<String> = generated.iter().map(|t| normalize(t.as_ref())).collect();
    let src_chars: Vec<Vec<char>> = source.iter().map(|t| t.as_ref().chars().collect()).collect();
    let gen_chars: Vec<Vec<char>> = generated.iter().map(|t| t.as_ref().chars().collect()).collect();
    let mut pair = vec![0u32; n * m];
    for i in 0..n {
        for j in 0..m {
            pair[i * m + j] = if src_norm[i] == gen_norm[j] {
                0
            } else if within_one_edit(&src_chars[i], &gen_chars[j]) {
                NEAR_MATCH
            } else {
                UNIT
            };
        }
    }
    for j in (0..m).rev() {
        suffix[n * width + j] = suffix[n * width + j + 1] + UNIT;
    }
    for i in (0..n).rev() {
        suffix[i * width + m] = suffix[(i + 1) * width + m] + UNIT;
        for j in (0..m).rev() {
            let diag = pair[i * m + j] + suffix[(i + 1) * width + j + 1];
            let del = UNIT + suffix[(i + 1) * width + j];
            let ins = UNIT + suffix[i * width + j + 1];
            suffix[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = suffix[i * width + j];
        if i < n && j < m && pair[i * m + j] + suffix[(i + 1) * width + j + 1] == here {
            let kind = if pair[i * m + j] == 0 { EditKind::Match } else { EditKind::Substitute };
            ops.push(EditOp {
                kind,
                source: Some(i),
                generated: Some(j),
            });
            i += 1;
            j += 1;
        } else if i < n && UNIT + suffix[(i + 1) * width + j] == here {
            ops.push(EditOp {
                kind: EditKind::Delete,
                source: Some(i),
                generated: None,
            });
            i += 1;
        } else {
            ops.push(EditOp {
                kind: EditKind::Insert,
                source: None,
                generated: Some(j),
            });
            j += 1;
        }
    }
    Alignment {
        ops,
        cost_units: suffix[0],
    }
}

/// Carries generated span labels onto source tokens.
///
/// A source token paired (Match/Substitute) with a generated token inside a
/// span takes that span's type. A deleted source token takes a type only
/// when its nearest paired neighbours on both sides carry that type; it then
/// joins the left neighbour's component. Begin/inside tags are recomputed so
/// that each component starts with `B-`.
pub fn project_labels(ops: &[EditOp], generated_spans: &[ComponentSpan], n_source: usize) -> Vec<BioTag> {
    let n_generated = ops.iter().filter_map(|o| o.generated).max().map_or(0, |g| g + 1);
    let mut gen_label: Vec<Option<(usize, ComponentType)>> = vec![None; n_generated];
    for (sid, span) in generated_spans.iter().enumerate() {
        let end = (span.end_token + 1).min(n_generated);
        for label in gen_label.iter_mut().take(end).skip(span.start_token) {
            *label = Some((sid, span.kind));
        }
    }

    let mut src_label: Vec<Option<(usize, ComponentType)>> = vec![None; n_source];
    let mut paired = vec![false; n_source];
    for op in ops {
        if let (Some(s), Some(g)) = (op.source, op.generated) {
            src_label[s] = gen_label[g];
            paired[s] = true;
        }
    }

    let mut left: Option<(usize, ComponentType)> = None;
    let mut pending: Vec<usize> = Vec::new();
    for s in 0..n_source {
        if paired[s] {
            let right = src_label[s];
            if let (Some((sid, lk)), Some((_, rk))) = (left, right) {
                if lk == rk {
                    for &d in &pending {
                        src_label[d] = Some((sid, lk));
                    }
                }
            }
            pending.clear();
            left = right;
        } else {
            pending.push(s);
        }
    }

    let mut tags = Vec::with_capacity(n_source);
    let mut prev: Option<usize> = None;
    for label in src_label {
        match label {
            None => {
                tags.push(BioTag::O);
                prev = None;
            }
            Some((sid, kind)) => {
                tags.push(if prev == Some(sid) { kind.inside() } else { kind.begin() });
                prev = Some(sid);
            }
        }
    }
    tags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiscrepancyKind {
    LabelRefinement,
    LexicalAdjustment,
    Hallucination,
    Discovery,
    Miss,
    BoundaryShift,
}

impl DiscrepancyKind {
    pub const ALL: [DiscrepancyKind; 6] = [
        DiscrepancyKind::LabelRefinement,
        DiscrepancyKind::LexicalAdjustment,
        DiscrepancyKind::Hallucination,
        DiscrepancyKind::Discovery,
        DiscrepancyKind::Miss,
        DiscrepancyKind::BoundaryShift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiscrepancyKind::LabelRefinement => "LabelRefinement",
            DiscrepancyKind::LexicalAdjustment => "LexicalAdjustment",
            DiscrepancyKind::Hallucination => "Hallucination",
            DiscrepancyKind::Discovery => "Discovery",
            DiscrepancyKind::Miss => "Miss",
            DiscrepancyKind::BoundaryShift => "BoundaryShift",
        }
    }
}

impl fmt::Display for DiscrepancyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscrepancyRecord {
    pub kind: DiscrepancyKind,
    /// Inclusive source token interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<(usize, usize)>,
    /// Inclusive generated token interval (for edit ops) or projected
    /// source interval (for span records).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_span: Option<(usize, usize)>,
    pub note: String,
}

/// How gold and projected spans were paired.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanMatching {
    /// `(gold index, projected index)` pairs.
    pub matched: Vec<(usize, usize)>,
    pub missed_gold: Vec<usize>,
    pub discovered: Vec<usize>,
}

/// Pairs gold and projected spans one-to-one, largest token overlap first
/// (ties: earlier gold, then earlier projected).
pub fn match_spans(gold: &[ComponentSpan], projected: &[ComponentSpan]) -> SpanMatching {
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for (gi, g) in gold.iter().enumerate() {
        for (pi, p) in projected.iter().enumerate() {
            let overlap = g.overlap(p);
            if overlap > 0 {
                candidates.push((overlap, gi, pi));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gold_used = vec![false; gold.len()];
    let mut proj_used = vec![false; projected.len()];
    let mut matched = Vec::new();
    for (_, gi, pi) in candidates {
        if !gold_used[gi] && !proj_used[pi] {
            gold_used[gi] = true;
            proj_used[pi] = true;
            matched.push((gi, pi));
        }
    }
    matched.sort_unstable();
    SpanMatching {
        matched,
        missed_gold: (0..gold.len()).filter(|&i| !gold_used[i]).collect(),
        discovered: (0..projected.len()).filter(|&i| !proj_used[i]).collect(),
    }
}

pub fn jaccard(a: &ComponentSpan, b: &ComponentSpan) -> f64 {
    let inter = a.overlap(b);
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Classifies span-level and token-level differences between a gold chunk
/// and a projected prediction.
///
/// Exact matches produce no record. Every other compared unit produces
/// exactly one.
pub fn classify_discrepancies(
    gold: &LabeledDocument,
    projected: &[BioTag],
    ops: &[EditOp],
    generated_tokens: &[Token],
    jaccard_threshold: f64,
) -> Vec<DiscrepancyRecord> {
    let (projected_spans, _) = bio_to_spans(projected, BioMode::Lenient).expect("lenient decoding never fails");
    let matching = match_spans(&gold.spans, &projected_spans);
    let text_of = |span: &ComponentSpan| -> String {
        gold.tokens[span.start_token..=span.end_token]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut records = Vec::new();

    for &(gi, pi) in &matching.matched {
        let g = &gold.spans[gi];
        let p = &projected_spans[pi];
        let jac = jaccard(g, p);
        let kind = if g.kind != p.kind && jac >= jaccard_threshold {
            DiscrepancyKind::LabelRefinement
        } else if g.kind == p.kind && g.start_token == p.start_token && g.end_token == p.end_token {
            continue;
        } else {
            DiscrepancyKind::BoundaryShift
        };
        let note = if kind == DiscrepancyKind::LabelRefinement {
            format!("{} predicted as {} (jaccard {:.2}): \"{}\"", g.kind, p.kind, jac, text_of(g))
        } else {
            format!(
                "gold {} {}..{} vs predicted {} {}..{} (jaccard {:.2})",
                g.kind, g.start_token, g.end_token, p.kind, p.start_token, p.end_token, jac
            )
        };
        records.push(DiscrepancyRecord {
            kind,
            source_span: Some((g.start_token, g.end_token)),
            generated_span: Some((p.start_token, p.end_token)),
            note,
        });
    }
    for &gi in &matching.missed_gold {
        let g = &gold.spans[gi];
        records.push(DiscrepancyRecord {
            kind: DiscrepancyKind::Miss,
            source_span: Some((g.start_token, g.end_token)),
            generated_span: None,
            note: format!("gold {} not predicted: \"{}\"", g.kind, text_of(g)),
        });
    }
    for &pi in &matching.discovered {
        let p = &projected_spans[pi];
        records.push(DiscrepancyRecord {
            kind: DiscrepancyKind::Discovery,
            source_span: None,
            generated_span: Some((p.start_token, p.end_token)),
            note: format!("predicted {} without gold counterpart: \"{}\"", p.kind, text_of(p)),
        });
    }

    for op in ops {
        let src = op.source.map(|s| gold.tokens[s].text.as_str());
        let gen = op.generated.and_then(|g| generated_tokens.get(g)).map(|t| t.text.as_str());
        let (kind, note) = match (op.kind, src, gen) {
            (EditKind::Match, Some(s), Some(g)) if s != g => (DiscrepancyKind::LexicalAdjustment, format!("\"{s}\" -> \"{g}\" (case or punctuation variant)")),
            (EditKind::Match, ..) => continue,
            (EditKind::Substitute, Some(s), Some(g)) => {
                let what = if pair_cost(s, g) == NEAR_MATCH { "near match" } else { "word substitution" };
                (DiscrepancyKind::LexicalAdjustment, format!("\"{s}\" -> \"{g}\" ({what})"))
            }
            (EditKind::Delete, Some(s), _) => (DiscrepancyKind::LexicalAdjustment, format!("\"{s}\" omitted")),
            (EditKind::Insert, _, Some(g)) => (DiscrepancyKind::Hallucination, format!("\"{g}\" inserted")),
            _ => continue,
        };
        records.push(DiscrepancyRecord {
            kind,
            source_span: op.source.map(|s| (s, s)),
            generated_span: op.generated.map(|g| (g, g)),
            note,
        });
    }
    records
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignConfig {
    /// Token Jaccard at or above which a type change counts as refinement.
    pub jaccard_threshold: f64,
    pub decode_mode: DecodeMode,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            jaccard_threshold: 0.8,
            decode_mode: DecodeMode::Lenient,
        }
    }
}

/// Everything learned from comparing one generation with its source chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub alignment: Alignment,
    pub projected_bio: Vec<BioTag>,
    pub discrepancies: Vec<DiscrepancyRecord>,
    pub repairs: Vec<Repair>,
    pub generated_plain: String,
}

impl AlignmentReport {
    pub fn cost(&self) -> f64 {
        self.alignment.cost()
    }
}

/// Per-chunk alignment summary written to `alignments.jsonl`. Token
/// positions in the discrepancy records are chunk-relative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentExport {
    pub doc_id: String,
    pub chunk_index: usize,
    pub cost: f64,
    pub ops: String,
    pub discrepancies: Vec<DiscrepancyRecord>,
}

impl AlignmentExport {
    pub fn new(doc_id: impl Into<String>, chunk_index: usize, report: &AlignmentReport) -> Self {
        Self {
            doc_id: doc_id.into(),
            chunk_index,
            cost: report.cost(),
            ops: report.alignment.compact(),
            discrepancies: report.discrepancies.clone(),
        }
    }
}

/// Decodes a generation, aligns it to the gold chunk and projects labels.
///
/// When the decoded text reproduces the source verbatim, the source
/// tokenization is reused for the generation so that corpora with their own
/// tokenization align exactly.
pub fn analyze_generation(gold: &LabeledDocument, generation: &str, config: &AlignConfig) -> Result<AlignmentReport> {
    let parsed = decode_xml(generation, config.decode_mode)?;
    let (gen_tokens, gen_spans) = if parsed.plain_text == gold.text && parsed.tokens != gold.tokens {
        let spans = respan(&parsed.tokens, &parsed.spans, &gold.tokens);
        (gold.tokens.clone(), spans)
    } else {
        (parsed.tokens.clone(), parsed.spans.clone())
    };
    let alignment = align_tokens(
        &gold.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>(),
        &gen_tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>(),
    );
    let projected_bio = project_labels(&alignment.ops, &gen_spans, gold.tokens.len());
    let discrepancies = classify_discrepancies(gold, &projected_bio, &alignment.ops, &gen_tokens, config.jaccard_threshold);
    Ok(AlignmentReport {
        alignment,
        projected_bio,
        discrepancies,
        repairs: parsed.repairs,
        generated_plain: parsed.plain_text,
    })
}

/// Moves spans from one tokenization of a text onto another of the same text.
fn respan(from: &[Token], spans: &[ComponentSpan], onto: &[Token]) -> Vec<ComponentSpan> {
    let mut out: Vec<ComponentSpan> = Vec::new();
    for s in spans {
        let (start, end) = (from[s.start_token].start, from[s.end_token].end);
        if let Some((mut first, last, _)) = crate::corpus::snap_to_tokens(onto, start, end) {
            if let Some(prev) = out.last() {
                first = first.max(prev.end_token + 1);
            }
            if first <= last {
                out.push(ComponentSpan::new(first, last, s.kind));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Levenshtein distance over characters, capped: returns `limit + 1` as soon
    /// as the distance is known to exceed `limit`.
    fn bounded_levenshtein(a: &str, b: &str, limit: usize) -> usize {
        if a.len().abs_diff(b.len()) > 4 * limit + 3 {
            // byte lengths this far apart rule out a small char distance
            return limit + 1;
        }
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        if a.len().abs_diff(b.len()) > limit {
            return limit + 1;
        }
        let mut prev: Vec<usize> = (0..=b.len()).collect();
        let mut cur = vec![0; b.len() + 1];
        for i in 1..=a.len() {
            cur[0] = i;
            for j in 1..=b.len() {
                let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
                cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
            }
            if cur.iter().min().copied().unwrap_or(0) > limit {
                return limit + 1;
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        prev[b.len()]
    }
    use crate::corpus::{spans_to_bio, tokenize};

    fn words(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn identical_sequences_all_match() {
        let a = words("She's been doing this for 30 years");
        let al = align_tokens(&a, &a);
        assert_eq!(al.cost_units, 0);
        assert!(al.ops.iter().all(|o| o.kind == EditKind::Match));
    }

    #[test]
    fn hallucinated_word_is_one_insert() {
        let al = align_tokens(&words("doing this for 30 years"), &words("doing this job for 30 years"));
        assert_eq!(al.compact(), "2M1I3M");
        assert_eq!(al.ops[2].generated, Some(2));
        assert_eq!(al.cost(), 1.0);
    }

    #[test]
    fn cost_classes() {
        assert_eq!(pair_cost("Leaders", "leaders"), 0);
        assert_eq!(pair_cost("don\u{2019}t", "don't"), 0);
        assert_eq!(pair_cost("did", "do"), UNIT);
        assert_eq!(pair_cost("form", "forms"), NEAR_MATCH);
        assert_eq!(pair_cost("couple", "few"), UNIT);
    }

    #[test]
    fn tie_break_prefers_substitute_then_delete() {
        let al = align_tokens(&["couple", "of", "years"], &["few", "years"]);
        assert_eq!(al.compact(), "1S1D1M");
        let al = align_tokens(&["a"], &["b"]);
        assert_eq!(al.compact(), "1S");
        let al = align_tokens(&["a", "b"], &["b", "a"]);
        // cost 2: diagonal substitutions beat delete+insert at equal cost
        assert_eq!(al.compact(), "2S");
        let al = align_tokens(&["x", "a"], &["a"]);
        assert_eq!(al.compact(), "1D1M");
    }

    #[test]
    fn empty_sequences() {
        let empty: [&str; 0] = [];
        assert_eq!(align_tokens(&empty, &empty).ops.len(), 0);
        assert_eq!(align_tokens(&["a", "b"], &empty).compact(), "2D");
        assert_eq!(align_tokens(&empty, &["a"]).compact(), "1I");
    }

    #[test]
    fn identity_projection() {
        let ops = align_tokens(&["a", "b", "c", "d", "e"], &["a", "b", "c", "d", "e"]).ops;
        let spans = [ComponentSpan::new(2, 4, ComponentType::Premise)];
        assert_eq!(
            project_labels(&ops, &spans, 5),
            [BioTag::O, BioTag::O, BioTag::BPremise, BioTag::IPremise, BioTag::IPremise]
        );
    }

    #[test]
    fn adjacent_same_kind_spans_stay_separate() {
        let ops = align_tokens(&["a", "b", "c"], &["a", "b", "c"]).ops;
        let spans = [ComponentSpan::new(0, 0, ComponentType::Claim), ComponentSpan::new(1, 2, ComponentType::Claim)];
        assert_eq!(project_labels(&ops, &spans, 3), spans_to_bio(&spans, 3));
    }

    #[test]
    fn deleted_tokens_take_flanking_label_only_when_both_sides_agree() {
        // source "a b c d", generated "a d": b, c deleted
        let ops = align_tokens(&["a", "b", "c", "d"], &["a", "d"]).ops;
        let both = [ComponentSpan::new(0, 1, ComponentType::Claim)];
        assert_eq!(project_labels(&ops, &both, 4), [BioTag::BClaim, BioTag::IClaim, BioTag::IClaim, BioTag::IClaim]);
        let one_side = [ComponentSpan::new(0, 0, ComponentType::Claim)];
        assert_eq!(project_labels(&ops, &one_side, 4), [BioTag::BClaim, BioTag::O, BioTag::O, BioTag::O]);
        let mixed = [ComponentSpan::new(0, 0, ComponentType::Claim), ComponentSpan::new(1, 1, ComponentType::Premise)];
        assert_eq!(project_labels(&ops, &mixed, 4), [BioTag::BClaim, BioTag::O, BioTag::O, BioTag::BPremise]);
        // deleted at the edge has no left flank
        let ops = align_tokens(&["x", "a"], &["a"]).ops;
        assert_eq!(project_labels(&ops, &[ComponentSpan::new(0, 0, ComponentType::Claim)], 2), [BioTag::O, BioTag::BClaim]);
    }

    fn gold(tagged: &str) -> LabeledDocument {
        decode_xml(tagged, DecodeMode::Strict)
            .unwrap()
            .into_document("g", crate::corpus::SourceCorpus::Synthetic)
            .unwrap()
    }

    fn kinds(records: &[DiscrepancyRecord]) -> Vec<DiscrepancyKind> {
        records.iter().map(|r| r.kind).collect()
    }

    #[test]
    fn identity_generation_has_no_lexical_records() {
        let g = gold("<claim>A b</claim> c <premise>d e.</premise>");
        let generated = "A b <claim>c</claim> <premise>d e.</premise>";
        let report = analyze_generation(&g, generated, &AlignConfig::default()).unwrap();
        assert_eq!(report.alignment.count(EditKind::Match), g.tokens.len());
        assert_eq!(kinds(&report.discrepancies), [DiscrepancyKind::Miss, DiscrepancyKind::Discovery]);
    }

    #[test]
    fn boundary_shift_below_threshold_even_with_type_change() {
        let g = gold("<claim>a b c d e</claim>");
        let report = analyze_generation(&g, "<premise>a b</premise> c d e", &AlignConfig::default()).unwrap();
        assert_eq!(kinds(&report.discrepancies), [DiscrepancyKind::BoundaryShift]);
    }

    #[test]
    fn case_change_is_a_lexical_adjustment_on_a_match() {
        let g = gold("get <claim>everybody</claim> here");
        let report = analyze_generation(&g, "get <claim>Everybody</claim> here", &AlignConfig::default()).unwrap();
        assert_eq!(report.alignment.count(EditKind::Match), 3);
        assert_eq!(kinds(&report.discrepancies), [DiscrepancyKind::LexicalAdjustment]);
        assert_eq!(report.projected_bio, g.bio_tags());
    }

    #[test]
    fn verbatim_generation_reuses_source_tokens() {
        let rows = [("do", "B-Claim"), ("n't", "I-Claim"), ("go", "I-Claim"), (".", "O")];
        let g = crate::corpus::parse_token_table("t", crate::corpus::SourceCorpus::Synthetic, &rows, BioMode::Lenient)
            .unwrap()
            .value;
        assert_eq!(g.text, "do n't go.");
        let report = analyze_generation(&g, "<claim>do n't go</claim>.", &AlignConfig::default()).unwrap();
        assert_eq!(report.projected_bio, g.bio_tags());
        assert!(report.discrepancies.is_empty());
    }

    #[test]
    fn one_edit_check_agrees_with_levenshtein() {
        let words = ["", "a", "b", "ab", "ba", "abc", "acb", "abd", "xabc", "abcx", "aXc", "café", "cafe", "naïve"];
        for a in words {
            for b in words {
                let ac: Vec<char> = a.chars().collect();
                let bc: Vec<char> = b.chars().collect();
                assert_eq!(within_one_edit(&ac, &bc), bounded_levenshtein(a, b, 1) <= 1, "{a:?} {b:?}");
            }
        }
    }
}
