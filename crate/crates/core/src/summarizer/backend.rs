//! Chat-completion backends.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::Aspect;

/// Environment variable holding the bearer token for the HTTP endpoint.
pub const API_KEY_ENV: &str = "ASPECTSUM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEndpointConfig {
    /// Base URL of an OpenAI-style API, e.g. `http://localhost:8080/v1`.
    pub base_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Maximum number of concurrent requests.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_max_output_tokens() -> usize {
    512
}
fn default_timeout_secs() -> u64 {
    120
}
fn default_retries() -> u32 {
    2
}
fn default_parallelism() -> usize {
    4
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080/v1".to_string(),
            model_name: "mistral-7b-instruct-v0.2".to_string(),
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            timeout_secs: default_timeout_secs(),
            retries: default_retries(),
            parallelism: default_parallelism(),
        }
    }
}

impl LlmEndpointConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature >= 0.0) {
            return Err(format!("temperature {} must be >= 0", self.temperature));
        }
        if self.parallelism == 0 {
            return Err("parallelism must be >= 1".to_string());
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

/// What a request is for. Real endpoints only see the messages; mocks use
/// this to pick a behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Summarize(Aspect),
    Predict,
}

#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub doc_id: &'a str,
    pub task: Task,
    pub system: &'a str,
    pub user: &'a str,
    pub max_tokens: usize,
    pub temperature: f64,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Malformed(String),
    #[error("generation failed: {0}")]
    Generation(String),
}

/// A chat-completion provider. Implementations must be safe to call from
/// several threads at once.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError>;

    /// Stable description used in cache keys.
    fn fingerprint(&self) -> String;
}

/// Builds the JSON body of a chat-completion request.
pub fn request_body(model: &str, request: &ChatRequest<'_>) -> Value {
    json!({
        "model": model,
        "messages": [
            {"role": "system", "content": request.system},
            {"role": "user", "content": request.user},
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "stream": false,
    })
}

/// Extracts the first choice's message content from a response body.
pub fn parse_completion(body: &Value) -> Result<String, BackendError> {
    body.get("choices")
        .and_then(|c| c.as_array())
        .and_then(|c| c.first())
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed(format!("no choices[0].message.content in {body}")))
}

/// Blocking HTTP client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpBackend {
    config: LlmEndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: LlmEndpointConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self {
            config,
            agent,
            api_key,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        let body = request_body(&self.config.model_name, request);
        let mut req = self.agent.post(self.url());
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| match e {
            ureq::Error::Io(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
            | ureq::Error::Timeout(_) => BackendError::Unreachable(e.to_string()),
            other => BackendError::Generation(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Status { status, body: text });
        }
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        parse_completion(&value)
    }

    fn fingerprint(&self) -> String {
        format!(
            "http|{}|{}|{}|{}",
            self.config.base_url,
            self.config.model_name,
            self.config.temperature,
            self.config.max_output_tokens
        )
    }
}
