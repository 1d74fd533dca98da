//! Token-level BIO scoring, aggregation and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::align::{AlignmentExport, DiscrepancyKind, DiscrepancyRecord};
use crate::corpus::{bio_to_spans, BioMode, BioTag};
use crate::error::{Error, Result};
use crate::inference::DecodingParams;
use crate::tagcodec::DecodeMode;

const N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    /// Include the O class in the macro average.
    pub macro_with_o: bool,
    /// Leave classes without gold support out of the macro average instead
    /// of counting them as f1 = 0.
    pub skip_zero_support: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            macro_with_o: true,
            skip_zero_support: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub tag: BioTag,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold tokens of this class.
    pub support: u64,
    /// Predicted tokens of this class.
    pub predicted: u64,
}

impl ClassScores {
    fn from_counts(tag: BioTag, tp: u64, support: u64, predicted: u64) -> Self {
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        Self {
            tag,
            precision,
            recall,
            f1: f1(precision, recall),
            support,
            predicted,
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Unweighted mean; 0 for an empty slice.
pub fn macro_average(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Exact-match span counts. Not part of the token-level metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpanScores {
    pub gold: u64,
    pub predicted: u64,
    pub exact: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SpanScores {
    fn from_counts(gold: u64, predicted: u64, exact: u64) -> Self {
        let precision = ratio(exact, predicted);
        let recall = ratio(exact, gold);
        Self {
            gold,
            predicted,
            exact,
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub options: EvalOptions,
    pub documents: u64,
    pub tokens: u64,
    /// Rows are gold, columns predicted, both in [`BioTag::ALL`] order.
    pub confusion: [[u64; N]; N],
    pub class_scores: Vec<ClassScores>,
    pub macro_f1: f64,
    /// Token-level accuracy.
    pub accuracy: f64,
    /// Classes with no gold tokens (their f1 is 0 by convention).
    pub zero_support: Vec<BioTag>,
    /// Span-level exact match, an extra alongside the token-level scores.
    pub span_exact_match: SpanScores,
    pub discrepancy_tally: BTreeMap<DiscrepancyKind, u64>,
}

impl EvalReport {
    fn from_counts(
        options: EvalOptions,
        documents: u64,
        confusion: [[u64; N]; N],
        spans: (u64, u64, u64),
        discrepancy_tally: BTreeMap<DiscrepancyKind, u64>,
    ) -> Self {
        let class_scores: Vec<ClassScores> = BioTag::ALL
            .iter()
            .enumerate()
            .map(|(c, &tag)| {
                let support = confusion[c].iter().sum();
                let predicted = confusion.iter().map(|row| row[c]).sum();
                ClassScores::from_counts(tag, confusion[c][c], support, predicted)
            })
            .collect();
        let tokens: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..N).map(|c| confusion[c][c]).sum();
        let zero_support: Vec<BioTag> = class_scores.iter().filter(|s| s.support == 0).map(|s| s.tag).collect();
        let averaged: Vec<f64> = class_scores
            .iter()
            .filter(|s| options.macro_with_o || s.tag != BioTag::O)
            .filter(|s| !options.skip_zero_support || s.support > 0)
            .map(|s| s.f1)
            .collect();
        Self {
            options,
            documents,
            tokens,
            confusion,
            macro_f1: macro_average(&averaged),
            accuracy: ratio(trace, tokens),
            class_scores,
            zero_support,
            span_exact_match: SpanScores::from_counts(spans.0, spans.1, spans.2),
            discrepancy_tally,
        }
    }

    pub fn class(&self, tag: BioTag) -> &ClassScores {
        &self.class_scores[tag.index()]
    }

    pub fn class_f1(&self) -> [f64; N] {
        std::array::from_fn(|c| self.class_scores[c].f1)
    }

    pub fn is_empty(&self) -> bool {
        self.tokens == 0
    }

    /// Adds discrepancy records to the tally.
    pub fn tally<'a>(&mut self, records: impl IntoIterator<Item = &'a DiscrepancyRecord>) {
        for r in records {
            *self.discrepancy_tally.entry(r.kind).or_insert(0) += 1;
        }
    }
}

fn empty_tally() -> BTreeMap<DiscrepancyKind, u64> {
    DiscrepancyKind::ALL.iter().map(|k| (*k, 0)).collect()
}

/// Scores `(doc_id, gold, predicted)` sequences over source tokens.
pub fn evaluate<'a, I>(documents: I, options: &EvalOptions) -> Result<EvalReport>
where
    I: IntoIterator<Item = (&'a str, &'a [BioTag], &'a [BioTag])>,
{
    let mut confusion = [[0u64; N]; N];
    let mut spans = (0, 0, 0);
    let mut n_docs = 0;
    for (doc_id, gold, predicted) in documents {
        if gold.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                doc_id: doc_id.to_string(),
                gold: gold.len(),
                predicted: predicted.len(),
            });
        }
        n_docs += 1;
        for (g, p) in gold.iter().zip(predicted) {
            confusion[g.index()][p.index()] += 1;
        }
        let (gs, _) = bio_to_spans(gold, BioMode::Lenient).expect("lenient decoding never fails");
        let (ps, _) = bio_to_spans(predicted, BioMode::Lenient).expect("lenient decoding never fails");
        spans.0 += gs.len() as u64;
        spans.1 += ps.len() as u64;
        spans.2 += ps.iter().filter(|p| gs.contains(p)).count() as u64;
    }
    Ok(EvalReport::from_counts(*options, n_docs, confusion, spans, empty_tally()))
}

/// Sums confusion matrices, span counts and tallies, then recomputes every
/// score. Options come from the first report (defaults when empty).
pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> EvalReport {
    let mut options = None;
    let mut confusion = [[0u64; N]; N];
    let mut spans = (0, 0, 0);
    let mut docs = 0;
    let mut tally = empty_tally();
    for r in reports {
        options.get_or_insert(r.options);
        docs += r.documents;
        for (row, other) in confusion.iter_mut().zip(&r.confusion) {
            for (c, o) in row.iter_mut().zip(other) {
                *c += o;
            }
        }
        spans.0 += r.span_exact_match.gold;
        spans.1 += r.span_exact_match.predicted;
        spans.2 += r.span_exact_match.exact;
        for (k, v) in &r.discrepancy_tally {
            *tally.entry(*k).or_insert(0) += v;
        }
    }
    EvalReport::from_counts(options.unwrap_or_default(), docs, confusion, spans, tally)
}

/// Run settings embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub backend_id: String,
    pub template_version: String,
    pub decoding: DecodingParams,
    pub config_hash: String,
    pub jaccard_threshold: f64,
    pub decode_mode: DecodeMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Machine,
    Human,
}

pub const ACCURACY_NOTE: &str = "accuracy is token-level: correctly tagged source tokens over all source tokens";
const NO_DATA: &str = "no data";

#[derive(Serialize)]
struct MachineReport<'a> {
    metric_notes: [&'static str; 2],
    no_data: bool,
    metadata: &'a ReportMetadata,
    report: &'a EvalReport,
    discrepancy_examples: BTreeMap<DiscrepancyKind, Vec<Located<'a>>>,
}

#[derive(Serialize)]
struct Located<'a> {
    doc_id: &'a str,
    chunk_index: usize,
    #[serde(flatten)]
    record: &'a DiscrepancyRecord,
}

/// Up to `limit` records per kind, in input order.
fn examples(alignments: &[AlignmentExport], limit: usize) -> BTreeMap<DiscrepancyKind, Vec<Located<'_>>> {
    let mut out: BTreeMap<DiscrepancyKind, Vec<Located<'_>>> = BTreeMap::new();
    for a in alignments {
        for r in &a.discrepancies {
            let list = out.entry(r.kind).or_default();
            if list.len() < limit {
                list.push(Located {
                    doc_id: &a.doc_id,
                    chunk_index: a.chunk_index,
                    record: r,
                });
            }
        }
    }
    out
}

const EXAMPLES_PER_KIND: usize = 5;

pub fn render_report(
    report: &EvalReport,
    metadata: &ReportMetadata,
    alignments: &[AlignmentExport],
    format: ReportFormat,
) -> String {
    match format {
        ReportFormat::Machine => {
            let doc = MachineReport {
                metric_notes: [
                    ACCURACY_NOTE,
                    "span_exact_match is an additional span-level score, not one of the token-level metrics",
                ],
                no_data: report.is_empty(),
                metadata,
                report,
                discrepancy_examples: examples(alignments, EXAMPLES_PER_KIND),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Human => render_markdown(report, metadata, alignments),
    }
}

/// One markdown table row: class f1 in B-C, I-C, B-P, I-P, O order, macro,
/// accuracy, all to two decimals.
pub fn score_row(label: &str, class_f1: &[f64; N], macro_f1: f64, accuracy: Option<f64>) -> String {
    let mut row = format!("| {label} |");
    for v in class_f1 {
        let _ = write!(row, " {v:.2} |");
    }
    let _ = write!(row, " {macro_f1:.2} |");
    match accuracy {
        Some(a) => {
            let _ = write!(row, " {a:.2} |");
        }
        None => row.push_str(" - |"),
    }
    row
}

fn render_markdown(report: &EvalReport, meta: &ReportMetadata, alignments: &[AlignmentExport]) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Evaluation report\n");
    let _ = writeln!(md, "Note: {ACCURACY_NOTE}.");
    let macro_classes = if report.options.macro_with_o { "all five classes" } else { "the four component classes" };
    let zero = if report.options.skip_zero_support { "excluded" } else { "counted as f1 = 0" };
    let _ = writeln!(md, "Macro F1 is the unweighted mean over {macro_classes}; zero-support classes are {zero}.\n");
    let _ = writeln!(
        md,
        "Backend `{}`, template `{}`, temperature {}, top_p {}, max output tokens {}, decode mode {:?}, Jaccard threshold {}, config `{}`.\n",
        meta.backend_id,
        meta.template_version,
        meta.decoding.temperature,
        meta.decoding.top_p,
        meta.decoding.max_output_tokens,
        meta.decode_mode,
        meta.jaccard_threshold,
        meta.config_hash
    );
    let _ = writeln!(md, "Documents: {}, tokens: {}\n", report.documents, report.tokens);

    if report.is_empty() {
        let _ = writeln!(md, "**{NO_DATA}**: the evaluation contained no tokens.\n");
    }

    let _ = writeln!(md, "## Scores\n");
    let _ = writeln!(md, "| Run | B-C | I-C | B-P | I-P | O | F1-Macro | Acc |");
    let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
    if report.is_empty() {
        let _ = writeln!(md, "| {} | {NO_DATA} | {NO_DATA} | {NO_DATA} | {NO_DATA} | {NO_DATA} | {NO_DATA} | {NO_DATA} |", meta.backend_id);
    } else {
        let _ = writeln!(md, "{}", score_row(&meta.backend_id, &report.class_f1(), report.macro_f1, Some(report.accuracy)));
    }

    let _ = writeln!(md, "\n| Class | Precision | Recall | F1 | Support | Predicted |");
    let _ = writeln!(md, "|---|---|---|---|---|---|");
    for s in &report.class_scores {
        let flag = if s.support == 0 { " (no support)" } else { "" };
        let _ = writeln!(
            md,
            "| {}{flag} | {:.4} | {:.4} | {:.4} | {} | {} |",
            s.tag, s.precision, s.recall, s.f1, s.support, s.predicted
        );
    }
    if !report.zero_support.is_empty() {
        let names: Vec<&str> = report.zero_support.iter().map(|t| t.as_str()).collect();
        let _ = writeln!(md, "\nClasses without gold support: {}.", names.join(", "));
    }

    let _ = writeln!(md, "\n## Confusion matrix (rows gold, columns predicted)\n");
    let _ = writeln!(md, "| | B-C | I-C | B-P | I-P | O |");
    let _ = writeln!(md, "|---|---|---|---|---|---|");
    for (tag, row) in BioTag::ALL.iter().zip(&report.confusion) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        let _ = writeln!(md, "| {} | {} |", tag.short(), cells.join(" | "));
    }

    let sp = &report.span_exact_match;
    let _ = writeln!(md, "\n## Span exact match (additional, not a token-level metric)\n");
    let _ = writeln!(
        md,
        "gold {}, predicted {}, exact {}; precision {:.4}, recall {:.4}, f1 {:.4}",
        sp.gold, sp.predicted, sp.exact, sp.precision, sp.recall, sp.f1
    );

    let _ = writeln!(md, "\n## Discrepancies\n");
    let _ = writeln!(md, "| Kind | Count |");
    let _ = writeln!(md, "|---|---|");
    for kind in DiscrepancyKind::ALL {
        let _ = writeln!(md, "| {kind} | {} |", report.discrepancy_tally.get(&kind).copied().unwrap_or(0));
    }
    let ex = examples(alignments, EXAMPLES_PER_KIND);
    for kind in DiscrepancyKind::ALL {
        let Some(list) = ex.get(&kind) else { continue };
        let _ = writeln!(md, "\n### {kind}\n");
        for l in list {
            let mut pos = String::new();
            if let Some((a, b)) = l.record.source_span {
                let _ = write!(pos, " source {a}..{b}");
            }
            if let Some((a, b)) = l.record.generated_span {
                let _ = write!(pos, " generated {a}..{b}");
            }
            let _ = writeln!(md, "- `{}` chunk {}{pos}: {}", l.doc_id, l.chunk_index, l.record.note);
        }
    }
    md
}

#[cfg(test)]
mod tests {
    use super::*;
    use BioTag::*;

    fn eval1(gold: &[BioTag], pred: &[BioTag]) -> EvalReport {
        evaluate([("d", gold, pred)], &EvalOptions::default()).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let g = [BClaim, IClaim, O, BPremise, IPremise];
        let r = eval1(&g, &g);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        assert!(r.zero_support.is_empty());
        assert_eq!(r.span_exact_match.f1, 1.0);
    }

    #[test]
    fn hand_counted_scores() {
        // gold:  B-C I-C O   O
        // pred:  B-C O   O   B-P
        let r = eval1(&[BClaim, IClaim, O, O], &[BClaim, O, O, BPremise]);
        assert_eq!(r.confusion[IClaim.index()][O.index()], 1);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.class(BClaim).f1, 1.0);
        assert_eq!(r.class(IClaim).f1, 0.0);
        // O: tp 1, predicted 2, support 2 -> p = r = 0.5
        assert_eq!(r.class(O).f1, 0.5);
        assert_eq!(r.class(BPremise).precision, 0.0);
        assert_eq!(r.zero_support, vec![BPremise, IPremise]);
        assert!((r.macro_f1 - 1.5 / 5.0).abs() < 1e-12);
        let no_o = evaluate([("d", &[BClaim, IClaim, O, O][..], &[BClaim, O, O, BPremise][..])], &EvalOptions {
            macro_with_o: false,
            skip_zero_support: true,
        })
        .unwrap();
        assert!((no_o.macro_f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_o_is_flagged() {
        let r = eval1(&[O, O], &[O, O]);
        assert_eq!(r.class(O).f1, 1.0);
        assert_eq!(r.zero_support.len(), 4);
        assert!((r.macro_f1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_names_document() {
        let err = evaluate([("doc-7", &[O][..], &[O, O][..])], &EvalOptions::default()).unwrap_err();
        assert!(err.to_string().contains("doc-7"));
    }

    #[test]
    fn aggregate_of_one_is_identity() {
        let r = eval1(&[BClaim, IClaim, O], &[BClaim, O, O]);
        assert_eq!(aggregate([&r]), r);
    }

    #[test]
    fn empty_report_says_no_data() {
        let r = evaluate(std::iter::empty(), &EvalOptions::default()).unwrap();
        let meta = ReportMetadata {
            backend_id: "b".into(),
            template_version: "v1".into(),
            decoding: DecodingParams::default(),
            config_hash: "h".into(),
            jaccard_threshold: 0.8,
            decode_mode: DecodeMode::Lenient,
        };
        let md = render_report(&r, &meta, &[], ReportFormat::Human);
        assert!(md.contains(NO_DATA));
        let json: serde_json::Value = serde_json::from_str(&render_report(&r, &meta, &[], ReportFormat::Machine)).unwrap();
        assert_eq!(json["no_data"], true);
        assert_eq!(json["report"]["tokens"], 0);
    }

    #[test]
    fn tally_lists_every_record_with_position() {
        let rec = |i| DiscrepancyRecord {
            kind: DiscrepancyKind::Hallucination,
            source_span: None,
            generated_span: Some((i, i)),
            note: format!("\"w{i}\" inserted"),
        };
        let export = AlignmentExport {
            doc_id: "d".into(),
            chunk_index: 0,
            cost: 3.0,
            ops: "2M3I".into(),
            discrepancies: vec![rec(2), rec(3), rec(4)],
        };
        let mut r = eval1(&[O], &[O]);
        r.tally(&export.discrepancies);
        assert_eq!(r.discrepancy_tally[&DiscrepancyKind::Hallucination], 3);
        let meta = ReportMetadata {
            backend_id: "b".into(),
            template_version: "v1".into(),
            decoding: DecodingParams::default(),
            config_hash: "h".into(),
            jaccard_threshold: 0.8,
            decode_mode: DecodeMode::Lenient,
        };
        let md = render_report(&r, &meta, &[export], ReportFormat::Human);
        assert!(md.contains("| Hallucination | 3 |"));
        for i in 2..=4 {
            assert!(md.contains(&format!("generated {i}..{i}")));
        }
    }

    #[test]
    fn score_row_two_decimals() {
        assert_eq!(
            score_row("OPT-6.7B (PE)", &[0.78, 0.76, 0.87, 0.88, 0.97], 0.852, None),
            "| OPT-6.7B (PE) | 0.78 | 0.76 | 0.87 | 0.88 | 0.97 | 0.85 | - |"
        );
    }
}
