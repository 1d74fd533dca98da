use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::DecodingParams;
use crate::prompting::PromptTemplate;
use crate::tagcodec::{tag_skeleton, TagRole};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// The backend stopped because it hit the output length limit.
    pub truncated: bool,
}

impl Completion {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            truncated: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Worth retrying: timeouts, rate limits, 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Permanent(String),
}

/// Anything that turns a prompt into a completion.
pub trait CompletionBackend: Send + Sync {
    fn id(&self) -> &str;

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<Completion, BackendError>;
}

/// Answers from a fixed prompt → output table.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    id: String,
    outputs: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            outputs: HashMap::new(),
        }
    }

    pub fn insert(&mut self, prompt: impl Into<String>, output: impl Into<String>) {
        self.outputs.insert(prompt.into(), output.into());
    }

    pub fn with(mut self, prompt: impl Into<String>, output: impl Into<String>) -> Self {
        self.insert(prompt, output);
        self
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

impl CompletionBackend for ReplayBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<Completion, BackendError> {
        self.outputs
            .get(prompt)
            .map(Completion::new)
            .ok_or_else(|| BackendError::Permanent("no replay entry for prompt".into()))
    }
}

/// Returns the prompt's input text unchanged, i.e. predicts no components.
#[derive(Debug, Clone)]
pub struct EchoBackend {
    template: PromptTemplate,
}

impl EchoBackend {
    pub fn new(template: PromptTemplate) -> Self {
        Self { template }
    }
}

impl CompletionBackend for EchoBackend {
    fn id(&self) -> &str {
        "echo"
    }

    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<Completion, BackendError> {
        self.template
            .extract_input(prompt)
            .map(Completion::new)
            .ok_or_else(|| BackendError::Permanent("prompt was not rendered with the echo template".into()))
    }
}

/// Wraps a replay table and applies scripted, seeded edits to every answer:
/// flipped component types, dropped tags, inserted and substituted words.
///
/// Every answer that contains a component gets at least its first type
/// flipped, so the output never equals the wrapped answer.
#[derive(Debug, Clone)]
pub struct PerturbBackend {
    inner: ReplayBackend,
    seed: u64,
    /// Expected number of extra word-level edits per answer.
    pub edit_rate: f64,
}

const HALLUCINATED: &[&str] = &["really", "job", "very", "also", "indeed", "certainly"];

impl PerturbBackend {
    pub fn new(inner: ReplayBackend, seed: u64) -> Self {
        Self {
            inner,
            seed,
            edit_rate: 1.0,
        }
    }

    fn rng_for(&self, prompt: &str) -> ChaCha8Rng {
        let digest = Sha256::digest(prompt.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        for (b, s) in seed.iter_mut().zip(self.seed.to_le_bytes()) {
            *b ^= s;
        }
        ChaCha8Rng::from_seed(seed)
    }

    pub fn perturb(&self, prompt: &str, answer: &str) -> String {
        let mut rng = self.rng_for(prompt);
        let mut out = flip_first_component(answer);

        let edits = (self.edit_rate * 2.0 * rng.gen::<f64>()).round() as usize;
        for _ in 0..edits {
            let words: Vec<&str> = out.split(' ').collect();
            if words.len() < 2 {
                break;
            }
            let at = rng.gen_range(1..words.len());
            let mut words: Vec<String> = words.into_iter().map(str::to_string).collect();
            if rng.gen_bool(0.5) {
                words.insert(at, HALLUCINATED.choose(&mut rng).unwrap().to_string());
            } else if !words[at].contains('<') && !words[at].is_empty() {
                words[at] = words[at].to_uppercase();
            }
            out = words.join(" ");
        }
        if out == answer {
            // No component to flip: invent one around the whole answer.
            out = format!("<claim>{answer}</claim>");
        }
        out
    }
}

fn flip_first_component(answer: &str) -> String {
    let events = tag_skeleton(answer);
    let Some(open) = events.iter().find(|e| e.role == TagRole::Open) else {
        return answer.to_string();
    };
    let Some(close) = events.iter().find(|e| e.role == TagRole::Close && e.position > open.position) else {
        return answer.to_string();
    };
    let flipped = match open.kind.tag_name() {
        "claim" => "premise",
        _ => "claim",
    };
    let chars: Vec<char> = answer.chars().collect();
    let mut out: String = chars[..open.position].iter().collect();
    out.push_str(&format!("<{flipped}>"));
    out.extend(&chars[open.position + open.len..close.position]);
    out.push_str(&format!("</{flipped}>"));
    out.extend(&chars[close.position + close.len..]);
    out
}

impl CompletionBackend for PerturbBackend {
    fn id(&self) -> &str {
        "perturb"
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<Completion, BackendError> {
        let answer = self.inner.complete(prompt, params)?;
        Ok(Completion::new(self.perturb(prompt, &answer.text)))
    }
}

/// Fault injection: a seeded subset of prompts fails transiently for its
/// first `failures_per_prompt` attempts.
pub struct FlakyBackend<B> {
    inner: B,
    failure_rate: f64,
    failures_per_prompt: u32,
    seed: u64,
    attempts: Mutex<HashMap<String, u32>>,
}

impl<B: CompletionBackend> FlakyBackend<B> {
    pub fn new(inner: B, failure_rate: f64, failures_per_prompt: u32, seed: u64) -> Self {
        Self {
            inner,
            failure_rate,
            failures_per_prompt,
            seed,
            attempts: Mutex::new(HashMap::new()),
        }
    }

    /// Whether this prompt is one of the failing ones.
    pub fn is_flaky(&self, prompt: &str) -> bool {
        let digest = Sha256::digest(prompt.as_bytes());
        let mut seed = [0u8; 8];
        seed.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(seed) ^ self.seed);
        rng.gen_bool(self.failure_rate)
    }

    /// Calls made so far for `prompt`.
    pub fn calls(&self, prompt: &str) -> u32 {
        self.attempts.lock().unwrap().get(prompt).copied().unwrap_or(0)
    }
}

impl<B: CompletionBackend> CompletionBackend for FlakyBackend<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<Completion, BackendError> {
        let n = {
            let mut attempts = self.attempts.lock().unwrap();
            let n = attempts.entry(prompt.to_string()).or_insert(0);
            *n += 1;
            *n
        };
        if self.is_flaky(prompt) && n <= self.failures_per_prompt {
            return Err(BackendError::Transient(format!("injected failure {n}")));
        }
        self.inner.complete(prompt, params)
    }
}
