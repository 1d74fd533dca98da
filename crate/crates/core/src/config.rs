//! Run configuration file (TOML). Unknown keys are rejected and every value
//! is checked before a command runs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::AlignConfig;
use crate::corpus::{BioMode, InputFormat, SourceCorpus, SplitRatios};
use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::inference::{BatchOptions, ChatCompletionConfig, DecodingParams, RetryPolicy};
use crate::prompting::{ChunkBudget, PromptTemplate};
use crate::tagcodec::DecodeMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusInput {
    pub path: PathBuf,
    pub format: InputFormat,
    pub source: SourceCorpus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    /// Raw inputs for `convert`.
    pub inputs: Vec<CorpusInput>,
    /// Canonical corpus used by the other commands.
    pub canonical: Option<PathBuf>,
    pub bio_mode: BioMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptSection {
    /// Built-in template version, used unless `template_file` is set.
    pub template_version: String,
    /// TOML file holding a custom template.
    pub template_file: Option<PathBuf>,
    pub budget_tokens: usize,
    pub safety_factor: f64,
}

impl Default for PromptSection {
    fn default() -> Self {
        let budget = ChunkBudget::default();
        Self {
            template_version: "v1".into(),
            template_file: None,
            budget_tokens: budget.tokens,
            safety_factor: budget.safety_factor,
        }
    }
}

impl PromptSection {
    pub fn budget(&self) -> ChunkBudget {
        ChunkBudget {
            tokens: self.budget_tokens,
            safety_factor: self.safety_factor,
        }
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        match &self.template_file {
            None => PromptTemplate::builtin(&self.template_version),
            Some(path) => {
                let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let t: PromptTemplate = toml::from_str(&raw).map_err(|e| Error::Template(format!("{}: {e}", path.display())))?;
                t.validate()?;
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Answers each prompt with the gold tagging of its chunk.
    Gold,
    /// Returns the input untagged.
    Echo,
    /// Gold answers with seeded label flips and word edits.
    Perturb,
    /// Answers only from transcripts listed in `replay`.
    Replay,
    /// Chat-completion endpoint.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Defaults to the kind name (or the model name for `http`).
    pub backend_id: Option<String>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub parallelism: usize,
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub seed: u64,
    /// Transcripts whose successful records are reused instead of calling
    /// the backend.
    pub replay: Vec<PathBuf>,
}

impl Default for BackendSection {
    fn default() -> Self {
        let batch = BatchOptions::default();
        Self {
            kind: BackendKind::Gold,
            backend_id: None,
            endpoint: None,
            model: None,
            api_key_env: None,
            timeout_secs: 120,
            parallelism: batch.parallelism,
            max_retries: batch.retry.max_retries,
            base_delay_ms: batch.retry.base_delay_ms,
            seed: 0,
            replay: Vec::new(),
        }
    }
}

impl BackendSection {
    pub fn backend_id(&self) -> String {
        if let Some(id) = &self.backend_id {
            return id.clone();
        }
        match self.kind {
            BackendKind::Gold => "gold".into(),
            BackendKind::Echo => "echo".into(),
            BackendKind::Perturb => "perturb".into(),
            BackendKind::Replay => "replay".into(),
            BackendKind::Http => self.model.clone().unwrap_or_else(|| "http".into()),
        }
    }

    pub fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            parallelism: self.parallelism,
            retry: RetryPolicy {
                max_retries: self.max_retries,
                base_delay_ms: self.base_delay_ms,
            },
        }
    }

    pub fn http_config(&self) -> Result<ChatCompletionConfig> {
        let (Some(endpoint), Some(model)) = (&self.endpoint, &self.model) else {
            return Err(Error::Config("backend kind `http` needs `endpoint` and `model`".into()));
        };
        Ok(ChatCompletionConfig {
            endpoint: endpoint.clone(),
            model: model.clone(),
            api_key_env: self.api_key_env.clone(),
            timeout_secs: self.timeout_secs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let r = SplitRatios::default();
        Self {
            train: r.train,
            dev: r.dev,
            test: r.test,
            seed: 13,
        }
    }
}

impl SplitSection {
    pub fn ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.train,
            dev: self.dev,
            test: self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub macro_with_o: bool,
    pub skip_zero_support: bool,
    pub jaccard_threshold: f64,
    pub decode_mode: DecodeMode,
    /// Score only the chunks the transcript covers.
    pub allow_partial: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EvalOptions::default();
        let a = AlignConfig::default();
        Self {
            macro_with_o: e.macro_with_o,
            skip_zero_support: e.skip_zero_support,
            jaccard_threshold: a.jaccard_threshold,
            decode_mode: a.decode_mode,
            allow_partial: false,
        }
    }
}

impl EvalSection {
    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            macro_with_o: self.macro_with_o,
            skip_zero_support: self.skip_zero_support,
        }
    }

    pub fn align(&self) -> AlignConfig {
        AlignConfig {
            jaccard_threshold: self.jaccard_threshold,
            decode_mode: self.decode_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub corpus: CorpusSection,
    pub prompt: PromptSection,
    pub backend: BackendSection,
    pub decoding: DecodingParams,
    pub split: SplitSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            corpus: CorpusSection::default(),
            prompt: PromptSection::default(),
            backend: BackendSection::default(),
            decoding: DecodingParams::default(),
            split: SplitSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(raw: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(raw).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&raw).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.prompt;
        if p.budget_tokens == 0 {
            return Err(Error::Config("prompt.budget_tokens must be positive".into()));
        }
        if !(p.safety_factor > 0.0 && p.safety_factor <= 1.0) {
            return Err(Error::Config(format!("prompt.safety_factor must be in (0, 1], got {}", p.safety_factor)));
        }
        if p.template_file.is_none() {
            PromptTemplate::builtin(&p.template_version)?;
        }
        let b = &self.backend;
        if b.parallelism == 0 {
            return Err(Error::Config("backend.parallelism must be at least 1".into()));
        }
        if b.kind == BackendKind::Http {
            b.http_config()?;
        }
        if b.backend_id.as_deref() == Some("") {
            return Err(Error::Config("backend.backend_id must not be empty".into()));
        }
        self.decoding.validate()?;
        self.split.ratios().validate().map_err(|e| Error::Config(e.to_string()))?;
        let j = self.eval.jaccard_threshold;
        if !(j > 0.0 && j <= 1.0) {
            return Err(Error::Config(format!("eval.jaccard_threshold must be in (0, 1], got {j}")));
        }
        Ok(())
    }

    /// SHA-256 (hex) of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
