use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{parse_standoff, parse_token_table_file, read_canonical_file, BioMode, LabeledDocument, SourceCorpus, Warning};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// `.txt` + `.ann` pairs (a pair's path may name either file, or a
    /// directory of pairs).
    Standoff,
    /// Tab-separated `token<TAB>tag` rows, blank line between documents.
    Bio,
    /// Canonical JSON-lines records.
    Canonical,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standoff" | "brat" => Ok(InputFormat::Standoff),
            "bio" | "conll" | "tsv" => Ok(InputFormat::Bio),
            "canonical" | "jsonl" => Ok(InputFormat::Canonical),
            _ => Err(Error::Config(format!("unknown input format `{s}`"))),
        }
    }
}

/// A file that could not be read or parsed.
#[derive(Debug)]
pub struct FileError {
    pub path: PathBuf,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct LoadOutcome {
    pub documents: Vec<LabeledDocument>,
    pub warnings: Vec<(PathBuf, Warning)>,
    pub errors: Vec<FileError>,
}

impl LoadOutcome {
    fn absorb(&mut self, path: &Path, result: Result<super::Parsed<Vec<LabeledDocument>>>) {
        match result {
            Ok(parsed) => {
                self.documents.extend(parsed.value);
                self.warnings.extend(parsed.warnings.into_iter().map(|w| (path.to_path_buf(), w)));
            }
            Err(error) => self.errors.push(FileError {
                path: path.to_path_buf(),
                error,
            }),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Files in `dir` with one of `extensions`, sorted by name.
fn files_with(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| extensions.iter().any(|e| x.eq_ignore_ascii_case(e))))
        .collect();
    files.sort();
    Ok(files)
}

fn load_standoff_pair(ann: &Path, source: SourceCorpus) -> Result<super::Parsed<Vec<LabeledDocument>>> {
    let txt = ann.with_extension("txt");
    let text = read(&txt)?;
    let annotations = read(ann)?;
    parse_standoff(&stem(ann), source, &text, &annotations).map(|p| super::Parsed {
        value: vec![p.value],
        warnings: p.warnings,
    })
}

/// Loads every document under `path`. Per-file failures are collected, not
/// fatal; the remaining files still load.
pub fn load_input(path: &Path, format: InputFormat, source: SourceCorpus, mode: BioMode) -> LoadOutcome {
    let mut out = LoadOutcome::default();
    let files = if path.is_dir() {
        let ext: &[&str] = match format {
            InputFormat::Standoff => &["ann"],
            InputFormat::Bio => &["tsv", "bio", "conll"],
            InputFormat::Canonical => &["jsonl"],
        };
        match files_with(path, ext) {
            Ok(f) => f,
            Err(error) => {
                out.errors.push(FileError {
                    path: path.to_path_buf(),
                    error,
                });
                return out;
            }
        }
    } else if format == InputFormat::Standoff {
        vec![path.with_extension("ann")]
    } else {
        vec![path.to_path_buf()]
    };

    for file in files {
        let result = match format {
            InputFormat::Standoff => load_standoff_pair(&file, source),
            InputFormat::Bio => read(&file).and_then(|c| parse_token_table_file(&stem(&file), source, &c, mode)),
            InputFormat::Canonical => read_canonical_file(&file),
        };
        out.absorb(&file, result);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_of_standoff_pairs() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "We should act. It is urgent.").unwrap();
        fs::write(dir.path().join("a.ann"), "T1\tClaim 0 14\nT2\tPremise 15 28\n").unwrap();
        fs::write(dir.path().join("b.txt"), "Short.").unwrap();
        fs::write(dir.path().join("b.ann"), "T1\tClaim 0 x\n").unwrap();
        fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let out = load_input(dir.path(), InputFormat::Standoff, SourceCorpus::PersuasiveEssays, BioMode::Lenient);
        assert_eq!(out.documents.len(), 1);
        assert_eq!(out.documents[0].id, "a");
        assert_eq!(out.documents[0].spans.len(), 2);
        assert_eq!(out.errors.len(), 1);
        assert!(out.errors[0].path.ends_with("b.ann"));
        assert!(matches!(out.errors[0].error, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_directory_loads_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = load_input(dir.path(), InputFormat::Bio, SourceCorpus::Synthetic, BioMode::Lenient);
        assert!(out.documents.is_empty() && out.errors.is_empty());
    }

    #[test]
    fn format_names() {
        assert_eq!("CoNLL".parse::<InputFormat>().unwrap(), InputFormat::Bio);
        assert!("xml".parse::<InputFormat>().is_err());
    }
}
