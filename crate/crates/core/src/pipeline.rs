//! Corpus → prompts → transcript → aligned, scored report.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::align::{analyze_generation, AlignmentExport};
use crate::config::{BackendKind, RunConfig};
use crate::corpus::LabeledDocument;
use crate::error::{Error, Result};
use crate::eval::{aggregate, evaluate, render_report, EvalReport, ReportFormat, ReportMetadata};
use crate::inference::{
    prompt_hash, run_batch, BackendError, BatchItem, BatchOptions, ChatCompletionBackend, Completion, CompletionBackend,
    DecodingParams, EchoBackend, GenerationCache, GenerationRecord, PerturbBackend, ReplayBackend, TranscriptStore,
};
use crate::prompting::{chunk_document, render_prompt, Chunk, ChunkBudget, PromptTemplate};
use crate::tagcodec::encode_xml;

/// A chunk with its gold view and rendered prompt.
#[derive(Debug, Clone)]
pub struct PlannedChunk {
    pub chunk: Chunk,
    pub gold: LabeledDocument,
    pub prompt: String,
}

fn ensure_unique_ids(corpus: &[LabeledDocument]) -> Result<()> {
    let mut seen = HashSet::new();
    for d in corpus {
        if !seen.insert(d.id.as_str()) {
            return Err(Error::DuplicateId(d.id.clone()));
        }
    }
    Ok(())
}

/// Chunks every document and renders its prompts, in corpus order.
pub fn plan_chunks(corpus: &[LabeledDocument], template: &PromptTemplate, budget: &ChunkBudget) -> Result<Vec<PlannedChunk>> {
    ensure_unique_ids(corpus)?;
    let mut plan = Vec::new();
    for doc in corpus {
        for chunk in chunk_document(doc, budget)? {
            plan.push(PlannedChunk {
                gold: chunk.view(doc),
                prompt: render_prompt(template, &chunk),
                chunk,
            });
        }
    }
    Ok(plan)
}

/// Replay table answering each chunk prompt with the chunk's gold tagging.
pub fn gold_replay_backend(plan: &[PlannedChunk], id: &str) -> Result<ReplayBackend> {
    let mut backend = ReplayBackend::new(id);
    for p in plan {
        backend.insert(p.prompt.clone(), encode_xml(&p.gold)?.into_string());
    }
    Ok(backend)
}

/// Gives a backend the configured identifier.
struct Named {
    id: String,
    inner: Box<dyn CompletionBackend>,
}

impl CompletionBackend for Named {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> std::result::Result<Completion, BackendError> {
        self.inner.complete(prompt, params)
    }
}

/// Builds the backend described by `config`. The credential for `http`
/// comes from the configured environment variable.
pub fn build_backend(config: &RunConfig, template: &PromptTemplate, plan: &[PlannedChunk]) -> Result<Box<dyn CompletionBackend>> {
    let b = &config.backend;
    let id = b.backend_id();
    let inner: Box<dyn CompletionBackend> = match b.kind {
        BackendKind::Gold => Box::new(gold_replay_backend(plan, &id)?),
        BackendKind::Echo => Box::new(EchoBackend::new(template.clone())),
        BackendKind::Perturb => Box::new(PerturbBackend::new(gold_replay_backend(plan, &id)?, b.seed)),
        BackendKind::Replay => Box::new(ReplayBackend::new(&id)),
        BackendKind::Http => Box::new(ChatCompletionBackend::new(&id, b.http_config()?).map_err(|e| Error::Backend(e.to_string()))?),
    };
    if inner.id() == id {
        Ok(inner)
    } else {
        Ok(Box::new(Named { id, inner }))
    }
}

#[derive(Debug, Clone)]
pub struct PredictOutcome {
    pub records: Vec<GenerationRecord>,
    /// Records whose generation failed after all retries.
    pub failures: Vec<GenerationRecord>,
}

/// Generates one record per planned chunk. Records already in `cache` are
/// reused; every result not already in `store` is appended to it.
pub fn predict(
    plan: &[PlannedChunk],
    template: &PromptTemplate,
    params: &DecodingParams,
    backend: &dyn CompletionBackend,
    options: &BatchOptions,
    cache: Option<&GenerationCache>,
    store: Option<&TranscriptStore>,
) -> Result<PredictOutcome> {
    let items: Vec<BatchItem> = plan
        .iter()
        .map(|p| BatchItem::new(p.prompt.clone(), template.version_id.clone()).with_chunk(p.chunk.doc_id.clone(), p.chunk.index))
        .collect();
    let records = run_batch(&items, params, backend, options, cache, store)?;
    let failures = records.iter().filter(|r| !r.is_ok()).cloned().collect();
    Ok(PredictOutcome { records, failures })
}

/// A chunk that could not be scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unscored {
    pub doc_id: String,
    pub chunk_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct EvaluationOutcome {
    pub report: EvalReport,
    pub alignments: Vec<AlignmentExport>,
    pub unscored: Vec<Unscored>,
    pub metadata: ReportMetadata,
}

fn uniform<T: PartialEq + Clone>(mut values: impl Iterator<Item = T>) -> Option<T> {
    let first = values.next()?;
    values.all(|v| v == first).then_some(first)
}

/// Scores transcript records against the gold chunks of `corpus`.
///
/// For each chunk the last successful record wins. Chunks without one are
/// an error unless `config.eval.allow_partial` is set, in which case they
/// are listed as unscored.
pub fn evaluate_records(corpus: &[LabeledDocument], records: &[GenerationRecord], config: &RunConfig) -> Result<EvaluationOutcome> {
    let template = config.prompt.template()?;
    let plan = plan_chunks(corpus, &template, &config.prompt.budget())?;
    let mut by_chunk: HashMap<(&str, usize), &GenerationRecord> = HashMap::new();
    let mut failed: HashMap<(&str, usize), &GenerationRecord> = HashMap::new();
    for r in records {
        let (Some(doc), Some(idx)) = (r.doc_id.as_deref(), r.chunk_index) else {
            log::warn!("transcript record {} has no chunk identifiers; ignored", r.prompt_hash);
            continue;
        };
        if r.is_ok() {
            by_chunk.insert((doc, idx), r);
        } else {
            failed.insert((doc, idx), r);
        }
    }

    let align = config.eval.align();
    let options = config.eval.options();
    let mut reports = Vec::new();
    let mut alignments = Vec::new();
    let mut unscored = Vec::new();
    let mut used: Vec<&GenerationRecord> = Vec::new();
    let mut scored_docs = BTreeSet::new();

    for p in &plan {
        let key = (p.chunk.doc_id.as_str(), p.chunk.index);
        let Some(record) = by_chunk.get(&key) else {
            let reason = match failed.get(&key).and_then(|r| r.error.clone()) {
                Some(e) => format!("generation failed: {e}"),
                None => "no transcript record".to_string(),
            };
            unscored.push(Unscored {
                doc_id: key.0.to_string(),
                chunk_index: key.1,
                reason,
            });
            continue;
        };
        let expected = prompt_hash(&p.prompt, &record.params, &record.backend_id, &record.template_version);
        if expected != record.prompt_hash {
            log::warn!("{} chunk {}: transcript prompt hash does not match the current corpus and template", key.0, key.1);
        }
        if record.truncated {
            log::warn!("{} chunk {}: generation was truncated", key.0, key.1);
        }
        let analysis = match analyze_generation(&p.gold, &record.output, &align) {
            Ok(a) => a,
            Err(e) => {
                unscored.push(Unscored {
                    doc_id: key.0.to_string(),
                    chunk_index: key.1,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let gold_bio = p.gold.bio_tags();
        let mut report = evaluate([(key.0, gold_bio.as_slice(), analysis.projected_bio.as_slice())], &options)?;
        report.tally(&analysis.discrepancies);
        reports.push(report);
        alignments.push(AlignmentExport::new(key.0, key.1, &analysis));
        used.push(record);
        scored_docs.insert(key.0);
    }

    if !unscored.is_empty() && !config.eval.allow_partial {
        let first = &unscored[0];
        return Err(Error::InvalidDocument {
            id: first.doc_id.clone(),
            message: format!(
                "chunk {}: {} ({} of {} chunks unscored; set allow_partial to score the rest)",
                first.chunk_index,
                first.reason,
                unscored.len(),
                plan.len()
            ),
        });
    }

    let mut report = aggregate(&reports);
    report.options = options;
    report.documents = scored_docs.len() as u64;
    let metadata = ReportMetadata {
        backend_id: uniform(used.iter().map(|r| r.backend_id.clone())).unwrap_or_else(|| config.backend.backend_id()),
        template_version: uniform(used.iter().map(|r| r.template_version.clone())).unwrap_or_else(|| template.version_id.clone()),
        decoding: uniform(used.iter().map(|r| r.params)).unwrap_or(config.decoding),
        config_hash: config.hash(),
        jaccard_threshold: align.jaccard_threshold,
        decode_mode: align.decode_mode,
    };
    Ok(EvaluationOutcome {
        report,
        alignments,
        unscored,
        metadata,
    })
}

/// Predicts and evaluates in one process without touching the filesystem.
pub fn run_in_process(corpus: &[LabeledDocument], config: &RunConfig) -> Result<EvaluationOutcome> {
    let template = config.prompt.template()?;
    let plan = plan_chunks(corpus, &template, &config.prompt.budget())?;
    let backend = build_backend(config, &template, &plan)?;
    let out = predict(&plan, &template, &config.decoding, backend.as_ref(), &config.backend.batch_options(), None, None)?;
    evaluate_records(corpus, &out.records, config)
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const ALIGNMENTS: &str = "alignments.jsonl";

/// Writes `report.json`, `report.md` and `alignments.jsonl` into `dir`.
pub fn write_evaluation(dir: &Path, outcome: &EvaluationOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, format) in [(REPORT_JSON, ReportFormat::Machine), (REPORT_MD, ReportFormat::Human)] {
        let path = dir.join(name);
        let body = render_report(&outcome.report, &outcome.metadata, &outcome.alignments, format);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(ALIGNMENTS);
    let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    for a in &outcome.alignments {
        writeln!(file, "{}", serde_json::to_string(a)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// A previously written evaluation, as read back from its directory.
#[derive(Debug, Clone)]
pub struct StoredEvaluation {
    pub report: EvalReport,
    pub metadata: ReportMetadata,
    pub alignments: Vec<AlignmentExport>,
}

#[derive(Deserialize)]
struct StoredMachineReport {
    metadata: ReportMetadata,
    report: EvalReport,
}

/// Reads back what [`write_evaluation`] wrote. A missing alignments file
/// means no examples.
pub fn read_evaluation(dir: &Path) -> Result<StoredEvaluation> {
    let path = dir.join(REPORT_JSON);
    let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let stored: StoredMachineReport = serde_json::from_str(&raw)?;
    let path = dir.join(ALIGNMENTS);
    let mut alignments = Vec::new();
    if path.exists() {
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            alignments.push(serde_json::from_str(line).map_err(|e| Error::parse(i + 1, format!("{}: {e}", path.display())))?);
        }
    }
    Ok(StoredEvaluation {
        report: stored.report,
        metadata: stored.metadata,
        alignments,
    })
}
