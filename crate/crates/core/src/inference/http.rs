//! Chat-completion endpoint client (the widely used `/v1/chat/completions`
//! request/response shape).

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, Completion, CompletionBackend};
use super::DecodingParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatCompletionConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    /// Model name sent in the request.
    pub model: String,
    /// Name of the environment variable holding the bearer token, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Serialize)]
pub(crate) struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: [ChatMessage<'a>; 1],
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Serialize)]
pub(crate) struct ChatMessage<'a> {
    pub role: &'a str,
    pub content: &'a str,
}

#[derive(Debug, Deserialize)]
pub(crate) struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
pub(crate) struct ChatChoice {
    pub message: ChatResponseMessage,
    #[serde(default)]
    pub finish_reason: Option<String>,
}

#[derive(Debug, Deserialize)]
pub(crate) struct ChatResponseMessage {
    #[serde(default)]
    pub content: Option<String>,
}

pub(crate) fn build_request<'a>(model: &'a str, prompt: &'a str, params: &DecodingParams) -> ChatRequest<'a> {
    ChatRequest {
        model,
        messages: [ChatMessage {
            role: "user",
            content: prompt,
        }],
        temperature: params.temperature,
        top_p: params.top_p,
        max_tokens: params.max_output_tokens,
    }
}

pub(crate) fn parse_response(body: &str) -> Result<Completion, BackendError> {
    let response: ChatResponse =
        serde_json::from_str(body).map_err(|e| BackendError::Permanent(format!("unexpected response body: {e}")))?;
    let choice = response
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::Permanent("response has no choices".into()))?;
    Ok(Completion {
        text: choice.message.content.unwrap_or_default(),
        truncated: choice.finish_reason.as_deref() == Some("length"),
    })
}

pub(crate) fn classify_status(status: u16, body: &str) -> BackendError {
    let msg = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
    if status == 408 || status == 429 || status >= 500 {
        BackendError::Transient(msg)
    } else {
        BackendError::Permanent(msg)
    }
}

pub struct ChatCompletionBackend {
    id: String,
    config: ChatCompletionConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl ChatCompletionBackend {
    /// Reads the credential from the configured environment variable.
    pub fn new(id: impl Into<String>, config: ChatCompletionConfig) -> Result<Self, BackendError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| BackendError::Permanent(format!("environment variable {var} is not set")))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Permanent(e.to_string()))?;
        Ok(Self {
            id: id.into(),
            config,
            api_key,
            client,
        })
    }
}

impl CompletionBackend for ChatCompletionBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<Completion, BackendError> {
        let mut request = self
            .client
            .post(&self.config.endpoint)
            .json(&build_request(&self.config.model, prompt, params));
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| BackendError::Transient(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, &body));
        }
        parse_response(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_shape() {
        let req = build_request("m", "hello", &DecodingParams::default());
        let v = serde_json::to_value(&req).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "model": "m",
                "messages": [{"role": "user", "content": "hello"}],
                "temperature": 0.01,
                "top_p": 0.1,
                "max_tokens": 2048
            })
        );
    }

    #[test]
    fn response_and_truncation() {
        let c = parse_response(r#"{"choices":[{"message":{"role":"assistant","content":"<claim>x</claim>"},"finish_reason":"stop"}]}"#).unwrap();
        assert_eq!(c.text, "<claim>x</claim>");
        assert!(!c.truncated);
        let c = parse_response(r#"{"choices":[{"message":{"content":"abc"},"finish_reason":"length"}]}"#).unwrap();
        assert!(c.truncated);
        assert!(parse_response(r#"{"choices":[]}"#).is_err());
    }

    #[test]
    fn status_classes() {
        assert!(matches!(classify_status(429, ""), BackendError::Transient(_)));
        assert!(matches!(classify_status(503, ""), BackendError::Transient(_)));
        assert!(matches!(classify_status(401, ""), BackendError::Permanent(_)));
    }

    #[test]
    fn missing_credential_is_reported() {
        let cfg = ChatCompletionConfig {
            endpoint: "http://127.0.0.1:1/v1/chat/completions".into(),
            model: "m".into(),
            api_key_env: Some("ACDGEN_TEST_SURELY_UNSET_VAR".into()),
            timeout_secs: 1,
        };
        assert!(ChatCompletionBackend::new("http", cfg).is_err());
    }

    #[test]
    fn unreachable_endpoint_is_transient() {
        let cfg = ChatCompletionConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            api_key_env: None,
            timeout_secs: 2,
        };
        let b = ChatCompletionBackend::new("http", cfg).unwrap();
        assert!(matches!(b.complete("p", &DecodingParams::default()), Err(BackendError::Transient(_))));
    }
}
