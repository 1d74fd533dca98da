use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use acdgen_core::config::RunConfig;
use acdgen_core::corpus::{write_canonical_file, LabeledDocument, SourceCorpus};
use acdgen_core::eval::{render_report, ReportFormat};
use acdgen_core::inference::read_transcript;
use acdgen_core::pipeline::{plan_chunks, run_in_process};
use acdgen_core::synth::{synthetic_corpus, SynthOptions};
use acdgen_core::tagcodec::encode_xml;
use serde_json::Value;
use tempfile::TempDir;

fn acdgen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acdgen"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn corpus_file(dir: &Path, n: usize, seed: u64) -> (PathBuf, Vec<LabeledDocument>) {
    let docs = synthetic_corpus(n, seed, &SynthOptions::default());
    let path = dir.join("corpus.jsonl");
    write_canonical_file(&path, &docs).unwrap();
    (path, docs)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn report_json(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn class_f1(report: &Value, tag: &str) -> f64 {
    report["report"]["class_scores"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["tag"] == tag)
        .unwrap()["f1"]
        .as_f64()
        .unwrap()
}

#[test]
fn convert_empty_directory_writes_empty_output() {
    let tmp = TempDir::new().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = acdgen(tmp.path(), &["convert", "--input", "empty", "--output", "c.jsonl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(tmp.path().join("c.jsonl")).unwrap(), "");
}

#[test]
fn convert_standoff_pair_gives_one_record() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path().join("in");
    fs::create_dir(&d).unwrap();
    fs::write(d.join("essay1.txt"), "We should act. Because it is urgent.\n").unwrap();
    fs::write(d.join("essay1.ann"), "T1\tClaim 0 14\tWe should act.\nT2\tPremise 23 36\tit is urgent.\n").unwrap();
    let out = acdgen(tmp.path(), &["convert", "--input", "in", "--format", "standoff", "--source", "pe", "--output", "-"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines: Vec<Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["id"], "essay1");
    assert_eq!(lines[0]["source_corpus"], "PersuasiveEssays");
    assert_eq!(lines[0]["spans"].as_array().unwrap().len(), 2);
}

#[test]
fn convert_malformed_line_fails_with_line_number() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("a.txt"), "One claim here.").unwrap();
    fs::write(tmp.path().join("a.ann"), "T1\tClaim 0 9\tOne claim\nT2\tPremise ten 14\there\n").unwrap();
    let out = acdgen(tmp.path(), &["convert", "--input", "a.ann", "--output", "c.jsonl"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    fs::write(tmp.path().join("bad.jsonl"), "{\"id\":\"x\",\"source_corpus\":\"Synthetic\",\"text\":\"a\",\"spans\":[]}\nnot json\n").unwrap();
    let out = acdgen(tmp.path(), &["convert", "--input", "bad.jsonl", "--format", "canonical", "--output", "c.jsonl"]);
    assert_ne!(code(&out), 0);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn configuration_errors_exit_with_usage_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[backend]\nkind = \"gold\"\nfavourite_colour = \"blue\"\n");
    let out = acdgen(tmp.path(), &["--config", cfg.to_str().unwrap(), "stats", "--corpus", "x.jsonl"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("favourite_colour"), "{}", stderr(&out));

    let out = acdgen(tmp.path(), &["predict", "--top-p", "0"]);
    assert_eq!(code(&out), 1);
    let out = acdgen(tmp.path(), &["frobnicate"]);
    assert_eq!(code(&out), 1);
    let out = acdgen(tmp.path(), &["stats", "--corpus", "missing.jsonl"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn stats_prints_per_source_and_total_rows() {
    let tmp = TempDir::new().unwrap();
    let mut docs = Vec::new();
    for (i, source) in [SourceCorpus::PersuasiveEssays, SourceCorpus::WebDiscourse, SourceCorpus::Synthetic].into_iter().enumerate() {
        for mut d in synthetic_corpus(3, i as u64, &SynthOptions::default()) {
            d.source_corpus = source;
            docs.push(d);
        }
    }
    write_canonical_file(&tmp.path().join("m.jsonl"), &docs).unwrap();
    let out = acdgen(tmp.path(), &["stats", "--corpus", "m.jsonl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    for row in ["| PersuasiveEssays | 3 |", "| WebDiscourse | 3 |", "| Synthetic | 3 |", "| Total | 9 |"] {
        assert!(text.contains(row), "missing {row}:\n{text}");
    }
    assert!(text.contains("FLAG PersuasiveEssays"));

    let out = acdgen(tmp.path(), &["stats", "--corpus", "m.jsonl", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["total"]["documents"], 9);
}

#[test]
fn split_and_export_write_files() {
    let tmp = TempDir::new().unwrap();
    corpus_file(tmp.path(), 20, 1);
    let out = acdgen(tmp.path(), &["split", "--corpus", "corpus.jsonl", "--out-dir", "parts", "--split-seed", "13"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let count = |name: &str| fs::read_to_string(tmp.path().join("parts").join(name)).unwrap().lines().count();
    assert_eq!(count("train.jsonl") + count("dev.jsonl") + count("test.jsonl"), 20);
    assert_eq!(count("train.jsonl"), 16);

    let out = acdgen(tmp.path(), &["export-train", "--corpus", "parts/train.jsonl", "--output", "pairs.jsonl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let raw = fs::read_to_string(tmp.path().join("pairs.jsonl")).unwrap();
    let first: Value = serde_json::from_str(raw.lines().next().unwrap()).unwrap();
    for key in ["doc_id", "chunk_index", "instruction", "input", "target", "template_version"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn gold_predict_then_evaluate_is_perfect() {
    let tmp = TempDir::new().unwrap();
    let (_, docs) = corpus_file(tmp.path(), 12, 3);
    let out = acdgen(tmp.path(), &["predict", "--corpus", "corpus.jsonl", "--backend", "gold", "--output-dir", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let config = RunConfig::default();
    let plan = plan_chunks(&docs, &config.prompt.template().unwrap(), &config.prompt.budget()).unwrap();
    let records = read_transcript(&tmp.path().join("out/transcript.jsonl")).unwrap();
    assert_eq!(records.len(), plan.len());
    for (r, p) in records.iter().zip(&plan) {
        assert_eq!(r.output, encode_xml(&p.gold).unwrap().as_str());
    }

    let out = acdgen(tmp.path(), &["evaluate", "--corpus", "corpus.jsonl", "--output-dir", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = report_json(&tmp.path().join("out"));
    assert_eq!(report["report"]["macro_f1"], 1.0);
    assert_eq!(report["report"]["accuracy"], 1.0);
    assert!(tmp.path().join("out/report.md").exists());
    assert!(tmp.path().join("out/alignments.jsonl").exists());
}

#[test]
fn echo_and_perturb_backends_score_below_gold() {
    let tmp = TempDir::new().unwrap();
    corpus_file(tmp.path(), 12, 4);
    for backend in ["echo", "perturb"] {
        let dir = format!("out-{backend}");
        let out = acdgen(tmp.path(), &["predict", "--corpus", "corpus.jsonl", "--backend", backend, "--output-dir", &dir]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let out = acdgen(tmp.path(), &["evaluate", "--corpus", "corpus.jsonl", "--output-dir", &dir]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let report = report_json(&tmp.path().join(&dir));
        assert!(report["report"]["macro_f1"].as_f64().unwrap() < 1.0);
        if backend == "echo" {
            let o = report["report"]["class_scores"].as_array().unwrap().iter().find(|c| c["tag"] == "O").unwrap().clone();
            assert_eq!(o["recall"], 1.0);
            for tag in ["B-Claim", "I-Claim", "B-Premise", "I-Premise"] {
                assert_eq!(class_f1(&report, tag), 0.0);
            }
        }
    }
}

#[test]
fn empty_corpus_gives_empty_transcript() {
    let tmp = TempDir::new().unwrap();
    write_canonical_file(&tmp.path().join("empty.jsonl"), &[]).unwrap();
    let out = acdgen(tmp.path(), &["predict", "--corpus", "empty.jsonl", "--backend", "gold", "--output-dir", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(tmp.path().join("out/transcript.jsonl")).unwrap(), "");
    let out = acdgen(tmp.path(), &["evaluate", "--corpus", "empty.jsonl", "--output-dir", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(report_json(&tmp.path().join("out"))["no_data"], true);
}

#[test]
fn missing_chunks_need_allow_partial() {
    let tmp = TempDir::new().unwrap();
    corpus_file(tmp.path(), 6, 5);
    acdgen(tmp.path(), &["predict", "--corpus", "corpus.jsonl", "--backend", "gold", "--output-dir", "out"]);
    let path = tmp.path().join("out/transcript.jsonl");
    let raw = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = raw.lines().skip(1).collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();

    let out = acdgen(tmp.path(), &["evaluate", "--corpus", "corpus.jsonl", "--output-dir", "out"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("allow_partial"), "{}", stderr(&out));
    let out = acdgen(tmp.path(), &["evaluate", "--corpus", "corpus.jsonl", "--output-dir", "out", "--allow-partial"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("unscored: syn-0 chunk 0"), "{}", stderr(&out));
}

#[test]
fn resume_after_crash_has_no_duplicates() {
    let tmp = TempDir::new().unwrap();
    let (_, docs) = corpus_file(tmp.path(), 30, 6);
    let args = ["predict", "--corpus", "corpus.jsonl", "--backend", "perturb", "--output-dir", "out", "--parallelism", "4"];
    assert_eq!(code(&acdgen(tmp.path(), &args)), 0);
    let path = tmp.path().join("out/transcript.jsonl");
    let full = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = full.lines().collect();

    // A crash mid-run leaves a prefix of whole lines and possibly a torn one.
    let half = lines.len() / 2;
    let torn = &lines[half][..lines[half].len() / 2];
    fs::write(&path, format!("{}\n{torn}", lines[..half].join("\n"))).unwrap();
    assert_eq!(code(&acdgen(tmp.path(), &args)), 0);

    let records = read_transcript(&path).unwrap();
    let config = RunConfig::default();
    let plan = plan_chunks(&docs, &config.prompt.template().unwrap(), &config.prompt.budget()).unwrap();
    assert_eq!(records.len(), plan.len());
    let hashes: HashSet<_> = records.iter().map(|r| r.prompt_hash.as_str()).collect();
    assert_eq!(hashes.len(), records.len());
    let outputs: Vec<_> = records.iter().map(|r| r.output.as_str()).collect();
    let original: Vec<String> = lines.iter().map(|l| serde_json::from_str::<Value>(l).unwrap()["output"].as_str().unwrap().to_string()).collect();
    assert_eq!(outputs, original);

    // A further run finds everything stored and appends nothing.
    assert_eq!(code(&acdgen(tmp.path(), &args)), 0);
    assert_eq!(read_transcript(&path).unwrap().len(), plan.len());
}

#[test]
fn cli_run_matches_in_process_run_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (_, docs) = corpus_file(tmp.path(), 15, 7);
    let cfg_body = "output_dir = \"out\"\n[corpus]\ncanonical = \"corpus.jsonl\"\n[backend]\nkind = \"perturb\"\nseed = 9\nparallelism = 3\n";
    let cfg = write_config(tmp.path(), cfg_body);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&acdgen(tmp.path(), &["--config", cfg, "predict"])), 0);
    assert_eq!(code(&acdgen(tmp.path(), &["--config", cfg, "evaluate"])), 0);
    let written = fs::read_to_string(tmp.path().join("out/report.json")).unwrap();

    let config = RunConfig::from_toml(cfg_body).unwrap();
    let outcome = run_in_process(&docs, &config).unwrap();
    let expected = render_report(&outcome.report, &outcome.metadata, &outcome.alignments, ReportFormat::Machine);
    assert_eq!(written, expected);

    // Warm cache: predict again (nothing new) and re-evaluate.
    fs::remove_file(tmp.path().join("out/report.json")).unwrap();
    assert_eq!(code(&acdgen(tmp.path(), &["--config", cfg, "predict"])), 0);
    assert_eq!(code(&acdgen(tmp.path(), &["--config", cfg, "evaluate"])), 0);
    assert_eq!(fs::read_to_string(tmp.path().join("out/report.json")).unwrap(), written);

    let out = acdgen(tmp.path(), &["--config", cfg, "report", "--format", "machine"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), written);
    let out = acdgen(tmp.path(), &["--config", cfg, "report"]);
    assert!(stdout(&out).contains("| Run | B-C | I-C | B-P | I-P | O | F1-Macro | Acc |"));
}

#[test]
fn unreachable_backend_exits_with_backend_code() {
    let tmp = TempDir::new().unwrap();
    corpus_file(tmp.path(), 2, 8);
    let out = acdgen(
        tmp.path(),
        &[
            "predict",
            "--corpus",
            "corpus.jsonl",
            "--backend",
            "http",
            "--endpoint",
            "http://127.0.0.1:9/v1/chat/completions",
            "--model",
            "test-model",
            "--max-retries",
            "0",
            "--timeout-secs",
            "2",
            "--output-dir",
            "out",
        ],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let records = read_transcript(&tmp.path().join("out/transcript.jsonl")).unwrap();
    assert!(!records.is_empty() && records.iter().all(|r| !r.is_ok()));
}
