//! Completion backends, decoding parameters, retrying batch generation and
//! the append-only transcript store that doubles as a replay cache.

mod backend;
mod http;
mod transcript;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use backend::{BackendError, Completion, CompletionBackend, EchoBackend, FlakyBackend, PerturbBackend, ReplayBackend};
pub use http::{ChatCompletionBackend, ChatCompletionConfig};
pub use transcript::{read_transcript, GenerationCache, TranscriptStore};

use crate::error::{Error, Result};

/// Sampling settings sent with every request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self {
            temperature: 0.01,
            top_p: 0.1,
            max_output_tokens: 2048,
        }
    }
}

impl DecodingParams {
    /// Temperature 0: stricter than the default near-greedy setting.
    pub fn greedy() -> Self {
        Self {
            temperature: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be non-negative, got {}", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top_p must be in (0, 1], got {}", self.top_p)));
        }
        if self.max_output_tokens == 0 {
            return Err(Error::Config("max_output_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// One generation (or failed attempt) as stored in the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt_hash: String,
    pub backend_id: String,
    pub template_version: String,
    pub params: DecodingParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_index: Option<usize>,
    pub output: String,
    #[serde(default)]
    pub truncated: bool,
    pub attempts: u32,
    pub latency_ms: u64,
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GenerationRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Stable content hash of everything that determines a generation.
///
/// SHA-256 (hex) over the JSON array
/// `[prompt, backend_id, template_version, temperature, top_p, max_output_tokens]`.
pub fn prompt_hash(prompt: &str, params: &DecodingParams, backend_id: &str, template_version: &str) -> String {
    let key = serde_json::json!([
        prompt,
        backend_id,
        template_version,
        params.temperature,
        params.top_p,
        params.max_output_tokens
    ]);
    hex::encode(Sha256::digest(key.to_string().as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Backoff before retry `k` (1-based) is `base_delay_ms * 2^(k-1)`.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            base_delay_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay_ms: 0,
        }
    }

    fn delay(&self, retry: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1u64 << (retry - 1).min(16)))
    }
}

/// A prompt plus the identifiers recorded alongside its generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchItem {
    pub prompt: String,
    pub template_version: String,
    pub doc_id: Option<String>,
    pub chunk_index: Option<usize>,
}

impl BatchItem {
    pub fn new(prompt: impl Into<String>, template_version: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            template_version: template_version.into(),
            doc_id: None,
            chunk_index: None,
        }
    }

    pub fn with_chunk(mut self, doc_id: impl Into<String>, chunk_index: usize) -> Self {
        self.doc_id = Some(doc_id.into());
        self.chunk_index = Some(chunk_index);
        self
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn attempt(item: &BatchItem, params: &DecodingParams, backend: &dyn CompletionBackend, retry: &RetryPolicy) -> GenerationRecord {
    let started = Instant::now();
    let mut attempts = 0;
    let result = loop {
        attempts += 1;
        match backend.complete(&item.prompt, params) {
            Ok(c) => break Ok(c),
            Err(BackendError::Transient(msg)) if attempts <= retry.max_retries => {
                log::debug!("transient backend failure (attempt {attempts}): {msg}");
                std::thread::sleep(retry.delay(attempts));
            }
            Err(e) => break Err(e),
        }
    };
    let (output, truncated, error) = match result {
        Ok(c) => (c.text.trim_end().to_string(), c.truncated, None),
        Err(e) => (String::new(), false, Some(e.to_string())),
    };
    GenerationRecord {
        prompt_hash: prompt_hash(&item.prompt, params, backend.id(), &item.template_version),
        backend_id: backend.id().to_string(),
        template_version: item.template_version.clone(),
        params: *params,
        doc_id: item.doc_id.clone(),
        chunk_index: item.chunk_index,
        output,
        truncated,
        attempts,
        latency_ms: started.elapsed().as_millis() as u64,
        timestamp_ms: now_ms(),
        error,
    }
}

/// Generates one completion, retrying transient failures.
pub fn generate(
    prompt: &str,
    template_version: &str,
    params: &DecodingParams,
    backend: &dyn CompletionBackend,
    retry: &RetryPolicy,
) -> Result<GenerationRecord> {
    let record = attempt(&BatchItem::new(prompt, template_version), params, backend, retry);
    match &record.error {
        None => Ok(record),
        Some(e) => Err(Error::Backend(e.clone())),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub parallelism: usize,
    pub retry: RetryPolicy,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            parallelism: 4,
            retry: RetryPolicy::default(),
        }
    }
}

/// Records appended in input order even when items finish out of order.
struct OrderedSink<'a> {
    store: Option<&'a TranscriptStore>,
    next: usize,
    /// `None` marks an item whose record the store already holds.
    pending: BTreeMap<usize, Option<GenerationRecord>>,
    io_error: Option<Error>,
}

impl OrderedSink<'_> {
    fn push(&mut self, index: usize, record: Option<GenerationRecord>) {
        let Some(store) = self.store else {
            return;
        };
        self.pending.insert(index, record);
        while let Some(record) = self.pending.remove(&self.next) {
            if let Some(record) = record {
                if let Err(e) = store.append(&record) {
                    self.io_error.get_or_insert(e);
                }
            }
            self.next += 1;
        }
    }
}

/// Runs every item through the backend with at most `parallelism` calls in
/// flight. Results come back in input order; failed items carry their error.
///
/// Cache hits are returned without calling the backend. Every result (hit,
/// success or failure) is appended to `store` in input order unless the
/// store already holds that record.
pub fn run_batch(
    items: &[BatchItem],
    params: &DecodingParams,
    backend: &dyn CompletionBackend,
    options: &BatchOptions,
    cache: Option<&GenerationCache>,
    store: Option<&TranscriptStore>,
) -> Result<Vec<GenerationRecord>> {
    if options.parallelism == 0 {
        return Err(Error::Config("parallelism must be at least 1".into()));
    }
    params.validate()?;
    let results: Vec<Mutex<Option<GenerationRecord>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let sink = Mutex::new(OrderedSink {
        store,
        next: 0,
        pending: BTreeMap::new(),
        io_error: None,
    });

    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(item) = items.get(i) else {
            break;
        };
        let hash = prompt_hash(&item.prompt, params, backend.id(), &item.template_version);
        let record = match cache.and_then(|c| c.get(&hash)) {
            Some(mut hit) => {
                // The cached output is keyed by content; the identifiers are this item's.
                hit.doc_id = item.doc_id.clone();
                hit.chunk_index = item.chunk_index;
                hit
            }
            None => {
                let record = attempt(item, params, backend, &options.retry);
                if let Some(c) = cache {
                    c.insert(&record);
                }
                record
            }
        };
        let already_stored = store.is_some_and(|s| s.contains(&record));
        sink.lock().unwrap().push(i, (!already_stored).then(|| record.clone()));
        *results[i].lock().unwrap() = Some(record);
    };

    let workers = options.parallelism.min(items.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(worker);
        }
    });

    if let Some(e) = sink.into_inner().unwrap().io_error {
        return Err(e);
    }
    Ok(results.into_iter().map(|m| m.into_inner().unwrap().expect("every item processed")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_decoding_settings() {
        let p = DecodingParams::default();
        assert_eq!((p.temperature, p.top_p), (0.01, 0.1));
        assert!(p.validate().is_ok());
        assert!(DecodingParams::greedy().validate().is_ok());
        assert!(DecodingParams { top_p: 0.0, ..p }.validate().is_err());
        assert!(DecodingParams { temperature: -1.0, ..p }.validate().is_err());
    }

    #[test]
    fn hash_depends_on_every_key_part() {
        let p = DecodingParams::default();
        let h = prompt_hash("p", &p, "b", "v1");
        assert_eq!(h, prompt_hash("p", &p, "b", "v1"));
        assert_eq!(h.len(), 64);
        assert_ne!(h, prompt_hash("q", &p, "b", "v1"));
        assert_ne!(h, prompt_hash("p", &p, "c", "v1"));
        assert_ne!(h, prompt_hash("p", &p, "b", "v2"));
        assert_ne!(h, prompt_hash("p", &DecodingParams::greedy(), "b", "v1"));
    }

    #[test]
    fn backoff_doubles() {
        let r = RetryPolicy {
            max_retries: 3,
            base_delay_ms: 10,
        };
        assert_eq!(r.delay(1), Duration::from_millis(10));
        assert_eq!(r.delay(3), Duration::from_millis(40));
    }
}
