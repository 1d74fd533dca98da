use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;

use acdgen_core::config::RunConfig;
use acdgen_core::corpus::{
    load_input, merge_corpora, read_canonical_file, split as split_corpus, stats_by_source, write_canonical, write_canonical_file,
    BioTag, CorpusStats, InputFormat, LabeledDocument, SourceCorpus,
};
use acdgen_core::eval::{render_report, ReportFormat};
use acdgen_core::inference::{read_transcript, GenerationCache, TranscriptStore};
use acdgen_core::pipeline::{build_backend, evaluate_records, plan_chunks, predict as run_predict, read_evaluation, write_evaluation};
use acdgen_core::prompting::{export_training_pairs, write_training_pairs};
use acdgen_core::reference::{cross_check, render_cross_check};
use acdgen_core::Error;

use crate::failure::{Failure, USAGE};

pub const TRANSCRIPT: &str = "transcript.jsonl";

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?,
        _ => {}
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(BufWriter::new(file))
}

fn flush(mut out: impl Write, path: &Path) -> Result<(), Failure> {
    out.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Loads each input, reporting every file that fails. Documents from the
/// readable files are kept.
fn load_inputs(specs: &[(PathBuf, InputFormat, SourceCorpus)], config: &RunConfig) -> Result<(Vec<LabeledDocument>, usize), Failure> {
    let mut corpora = Vec::new();
    let mut failed = 0;
    for (path, format, source) in specs {
        if !path.exists() {
            eprintln!("{}: no such file or directory", path.display());
            failed += 1;
            continue;
        }
        let outcome = load_input(path, *format, *source, config.corpus.bio_mode);
        for e in &outcome.errors {
            eprintln!("{}: {}", e.path.display(), e.error);
        }
        failed += outcome.errors.len();
        corpora.push(outcome.documents);
    }
    Ok((merge_corpora(corpora)?, failed))
}

fn configured_inputs(config: &RunConfig) -> Vec<(PathBuf, InputFormat, SourceCorpus)> {
    config.corpus.inputs.iter().map(|i| (i.path.clone(), i.format, i.source)).collect()
}

/// The corpus named on the command line, else the configured canonical
/// file, else the configured raw inputs.
fn load_corpus(config: &RunConfig, explicit: Option<PathBuf>) -> Result<Vec<LabeledDocument>, Failure> {
    if let Some(path) = explicit.or_else(|| config.corpus.canonical.clone()) {
        return Ok(read_canonical_file(&path)?.value);
    }
    let specs = configured_inputs(config);
    if specs.is_empty() {
        return Err(Failure::new(USAGE, anyhow!("no corpus given: pass --corpus or set corpus.canonical or corpus.inputs")));
    }
    let (docs, failed) = load_inputs(&specs, config)?;
    if failed > 0 {
        return Err(Failure::data(format!("{failed} input file(s) could not be read")));
    }
    Ok(docs)
}

pub fn convert(
    config: &RunConfig,
    inputs: &[PathBuf],
    format: InputFormat,
    source: SourceCorpus,
    output: Option<PathBuf>,
) -> Result<(), Failure> {
    let specs = if inputs.is_empty() {
        configured_inputs(config)
    } else {
        inputs.iter().map(|p| (p.clone(), format, source)).collect()
    };
    if specs.is_empty() {
        return Err(Failure::new(USAGE, anyhow!("no inputs: pass --input or set corpus.inputs")));
    }
    let Some(output) = output.or_else(|| config.corpus.canonical.clone()) else {
        return Err(Failure::new(USAGE, anyhow!("no output: pass --output or set corpus.canonical")));
    };
    let (docs, failed) = load_inputs(&specs, config)?;
    if output.as_os_str() == "-" {
        write_canonical(io::stdout().lock(), &docs)?;
    } else {
        ensure_parent(&output)?;
        write_canonical_file(&output, &docs)?;
        eprintln!("wrote {} document(s) to {}", docs.len(), output.display());
    }
    if failed > 0 {
        return Err(Failure::data(format!("{failed} input file(s) could not be parsed")));
    }
    Ok(())
}

fn total(by_source: &BTreeMap<SourceCorpus, CorpusStats>) -> CorpusStats {
    by_source.values().fold(CorpusStats::default(), |acc, s| acc + *s)
}

fn stats_table(by_source: &BTreeMap<SourceCorpus, CorpusStats>) -> String {
    const TAGS: [BioTag; 5] = [BioTag::O, BioTag::BPremise, BioTag::IPremise, BioTag::BClaim, BioTag::IClaim];
    let mut out = String::from("| Corpus | Docs | Tokens | O | B-P | I-P | B-C | I-C | Claims | Premises |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    let mut row = |name: &str, s: &CorpusStats| {
        let _ = write!(out, "| {name} | {} | {} |", s.documents, s.tokens);
        for t in TAGS {
            let _ = write!(out, " {} |", s.tag_count(t));
        }
        let _ = writeln!(out, " {} | {} |", s.claims, s.premises);
    };
    for (source, s) in by_source {
        row(source.as_str(), s);
    }
    row("Total", &total(by_source));
    out
}

pub fn stats(config: &RunConfig, corpus: Option<PathBuf>, json: bool) -> Result<(), Failure> {
    let docs = load_corpus(config, corpus)?;
    let by_source = stats_by_source(&docs);
    let check = cross_check(&by_source);
    if json {
        let total = total(&by_source);
        let by_name: BTreeMap<&str, &CorpusStats> = by_source.iter().map(|(k, v)| (k.as_str(), v)).collect();
        let value = serde_json::json!({ "by_source": by_name, "total": total, "cross_check": check });
        println!("{}", serde_json::to_string_pretty(&value).map_err(Error::from)?);
    } else {
        print!("{}", stats_table(&by_source));
        println!();
        print!("{}", render_cross_check(&check));
    }
    Ok(())
}

pub fn split(config: &RunConfig, corpus: Option<PathBuf>, out_dir: Option<PathBuf>) -> Result<(), Failure> {
    let docs = load_corpus(config, corpus)?;
    let parts = split_corpus(&docs, &config.split.ratios(), config.split.seed)?;
    let dir = out_dir.unwrap_or_else(|| config.output_dir.join("split"));
    for (name, part) in [("train", &parts.train), ("dev", &parts.dev), ("test", &parts.test)] {
        let path = dir.join(format!("{name}.jsonl"));
        ensure_parent(&path)?;
        write_canonical_file(&path, part)?;
        println!("{name}: {} document(s) -> {}", part.len(), path.display());
    }
    Ok(())
}

pub fn export_train(config: &RunConfig, corpus: Option<PathBuf>, output: Option<PathBuf>) -> Result<(), Failure> {
    let docs = load_corpus(config, corpus)?;
    let template = config.prompt.template()?;
    let pairs = export_training_pairs(&docs, &template, &config.prompt.budget())?;
    let path = output.unwrap_or_else(|| config.output_dir.join("train_pairs.jsonl"));
    let mut out = create(&path)?;
    write_training_pairs(&mut out, &pairs)?;
    flush(out, &path)?;
    println!("{} pair(s) -> {}", pairs.len(), path.display());
    Ok(())
}

pub fn predict(config: &RunConfig, corpus: Option<PathBuf>, transcript: Option<PathBuf>) -> Result<(), Failure> {
    let docs = load_corpus(config, corpus)?;
    let template = config.prompt.template()?;
    let plan = plan_chunks(&docs, &template, &config.prompt.budget())?;
    let path = transcript.unwrap_or_else(|| config.output_dir.join(TRANSCRIPT));
    ensure_parent(&path)?;
    let store = TranscriptStore::open(&path)?;
    // Earlier runs into the same transcript make this one a resume.
    let cache = GenerationCache::load(&config.backend.replay)?;
    let previous = store.records()?;
    for r in &previous {
        cache.insert(r);
    }
    log::info!("{} cached generation(s) available", cache.len());
    let backend = build_backend(config, &template, &plan)?;
    let outcome = run_predict(
        &plan,
        &template,
        &config.decoding,
        backend.as_ref(),
        &config.backend.batch_options(),
        Some(&cache),
        Some(&store),
    )?;
    println!(
        "{} chunk(s), {} generated ok, {} failed -> {}",
        plan.len(),
        outcome.records.len() - outcome.failures.len(),
        outcome.failures.len(),
        path.display()
    );
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for f in &outcome.failures {
        eprintln!(
            "{} chunk {}: {}",
            f.doc_id.as_deref().unwrap_or("?"),
            f.chunk_index.map_or_else(|| "?".to_string(), |i| i.to_string()),
            f.error.as_deref().unwrap_or("")
        );
    }
    Err(Failure::backend(format!("{} of {} chunk(s) failed; re-run to retry them", outcome.failures.len(), plan.len())))
}

pub fn evaluate(config: &RunConfig, corpus: Option<PathBuf>, transcript: Option<PathBuf>) -> Result<(), Failure> {
    let docs = load_corpus(config, corpus)?;
    let path = transcript.unwrap_or_else(|| config.output_dir.join(TRANSCRIPT));
    let records = read_transcript(&path)?;
    let outcome = evaluate_records(&docs, &records, config)?;
    for u in &outcome.unscored {
        eprintln!("unscored: {} chunk {}: {}", u.doc_id, u.chunk_index, u.reason);
    }
    write_evaluation(&config.output_dir, &outcome)?;
    let r = &outcome.report;
    println!(
        "macro F1 {:.4}, token accuracy {:.4} over {} document(s), {} token(s); reports in {}",
        r.macro_f1,
        r.accuracy,
        r.documents,
        r.tokens,
        config.output_dir.display()
    );
    Ok(())
}

pub fn report(config: &RunConfig, dir: Option<PathBuf>, format: ReportFormat) -> Result<(), Failure> {
    let dir = dir.unwrap_or_else(|| config.output_dir.clone());
    let stored = read_evaluation(&dir)?;
    print!("{}", render_report(&stored.report, &stored.metadata, &stored.alignments, format));
    Ok(())
}
