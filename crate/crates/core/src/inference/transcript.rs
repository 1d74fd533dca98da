use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use super::GenerationRecord;
use crate::error::{Error, Result};

/// Append-only JSON-lines file of [`GenerationRecord`]s.
///
/// Each append is written and flushed as one line, so a killed run leaves a
/// readable prefix that a later run resumes from.
pub struct TranscriptStore {
    path: PathBuf,
    inner: Mutex<StoreInner>,
}

struct StoreInner {
    file: File,
    stored: HashSet<String>,
}

impl TranscriptStore {
    /// Opens (creating if needed) a transcript for appending. Existing
    /// successful records count as already stored.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        drop_torn_tail(&path)?;
        let existing = if path.exists() { read_transcript(&path)? } else { Vec::new() };
        let stored = existing.iter().filter(|r| r.is_ok()).map(|r| r.prompt_hash.clone()).collect();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            inner: Mutex::new(StoreInner { file, stored }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, record: &GenerationRecord) -> bool {
        record.is_ok() && self.inner.lock().unwrap().stored.contains(&record.prompt_hash)
    }

    pub fn append(&self, record: &GenerationRecord) -> Result<()> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut inner = self.inner.lock().unwrap();
        inner.file.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        inner.file.flush().map_err(|e| Error::io(&self.path, e))?;
        if record.is_ok() {
            inner.stored.insert(record.prompt_hash.clone());
        }
        Ok(())
    }

    pub fn records(&self) -> Result<Vec<GenerationRecord>> {
        read_transcript(&self.path)
    }
}

/// Cuts an incomplete final line so new appends start on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<()> {
    let Ok(bytes) = fs::read(path) else {
        return Ok(());
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    log::warn!("{}: dropping {} bytes of an incomplete final record", path.display(), bytes.len() - keep);
    let file = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
    file.set_len(keep as u64).map_err(|e| Error::io(path, e))
}

/// Reads a transcript, ignoring a torn final line left by a crash.
pub fn read_transcript(path: &Path) -> Result<Vec<GenerationRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let mut records = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(e) if i == last => log::warn!("{}: ignoring incomplete final line: {e}", path.display()),
            Err(e) => return Err(Error::parse(i + 1, e.to_string())),
        }
    }
    Ok(records)
}

/// Successful generations keyed by prompt hash. Reads are concurrent,
/// writes exclusive.
#[derive(Default)]
pub struct GenerationCache {
    map: RwLock<HashMap<String, GenerationRecord>>,
}

impl GenerationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records<I: IntoIterator<Item = GenerationRecord>>(records: I) -> Self {
        let cache = Self::new();
        for r in records {
            cache.insert(&r);
        }
        cache
    }

    /// Loads every successful record from the given transcript files.
    pub fn load(paths: &[PathBuf]) -> Result<Self> {
        let cache = Self::new();
        for path in paths {
            if fs::metadata(path).is_ok() {
                for r in read_transcript(path)? {
                    cache.insert(&r);
                }
            }
        }
        Ok(cache)
    }

    pub fn get(&self, hash: &str) -> Option<GenerationRecord> {
        self.map.read().unwrap().get(hash).cloned()
    }

    /// Keeps the first successful record per hash; failures are not cached.
    pub fn insert(&self, record: &GenerationRecord) {
        if record.is_ok() {
            self.map
                .write()
                .unwrap()
                .entry(record.prompt_hash.clone())
                .or_insert_with(|| record.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::DecodingParams;

    fn record(hash: &str, error: Option<&str>) -> GenerationRecord {
        GenerationRecord {
            prompt_hash: hash.into(),
            backend_id: "b".into(),
            template_version: "v1".into(),
            params: DecodingParams::default(),
            doc_id: None,
            chunk_index: None,
            output: "o".into(),
            truncated: false,
            attempts: 1,
            latency_ms: 0,
            timestamp_ms: 0,
            error: error.map(str::to_string),
        }
    }

    #[test]
    fn reopen_knows_stored_records_and_skips_torn_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        {
            let store = TranscriptStore::open(&path).unwrap();
            store.append(&record("a", None)).unwrap();
            store.append(&record("b", Some("boom"))).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"prompt_hash\":\"c\",\"backe").unwrap();
        drop(f);

        let cache = GenerationCache::load(std::slice::from_ref(&path)).unwrap();
        assert_eq!(cache.len(), 1);

        let store = TranscriptStore::open(&path).unwrap();
        assert!(store.contains(&record("a", None)));
        assert!(!store.contains(&record("b", None)));
        store.append(&record("d", None)).unwrap();
        assert_eq!(read_transcript(&path).unwrap().len(), 3);
        let cache = GenerationCache::load(&[path]).unwrap();
        assert_eq!(cache.len(), 2);
        assert!(cache.get("a").is_some());
    }
}
