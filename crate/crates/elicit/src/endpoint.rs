//! Chat endpoint abstraction and the HTTP client.

use std::time::Duration;

use ipelicit_core::eval::EndpointPrice;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::ElicitError;

/// Connection and pricing details of one model endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEndpoint {
    /// Ledger key; defaults to `model_id`.
    #[serde(default)]
    pub name: Option<String>,
    pub base_url: String,
    pub model_id: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_token_env: Option<String>,
    /// `None` leaves the provider default.
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Whether the provider honors the `seed` field.
    #[serde(default = "default_true")]
    pub supports_seed: bool,
    #[serde(default)]
    pub price_per_input_token: f64,
    #[serde(default)]
    pub price_per_output_token: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Transport retries after the first try (exponential backoff).
    #[serde(default = "default_transport_retries")]
    pub transport_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
}

fn default_true() -> bool {
    true
}
fn default_timeout() -> u64 {
    120
}
fn default_transport_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        ModelEndpoint {
            name: None,
            base_url: base_url.into(),
            model_id: model_id.into(),
            auth_token_env: None,
            temperature: None,
            seed: None,
            supports_seed: true,
            price_per_input_token: 0.0,
            price_per_output_token: 0.0,
            timeout_secs: default_timeout(),
            transport_retries: default_transport_retries(),
            backoff_base_ms: default_backoff_ms(),
        }
    }

    pub fn id(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.model_id)
    }

    pub fn validate(&self) -> Result<(), ElicitError> {
        let bad = |m: String| Err(ElicitError::InvalidConfig(m));
        if self.base_url.trim().is_empty() {
            return bad(format!("endpoint {}: base_url is empty", self.id()));
        }
        if self.model_id.trim().is_empty() {
            return bad("endpoint model_id is empty".into());
        }
        for (what, p) in [
            ("price_per_input_token", self.price_per_input_token),
            ("price_per_output_token", self.price_per_output_token),
        ] {
            if !(p >= 0.0 && p.is_finite()) {
                return bad(format!("endpoint {}: {what} must be >= 0, got {p}", self.id()));
            }
        }
        if let Some(t) = self.temperature {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("endpoint {}: temperature must be >= 0, got {t}", self.id()));
            }
        }
        Ok(())
    }

    pub fn price(&self) -> EndpointPrice {
        EndpointPrice {
            endpoint: self.id().to_string(),
            price_per_input_token: self.price_per_input_token,
            price_per_output_token: self.price_per_output_token,
        }
    }

    /// `base_url` with the chat-completions path appended unless already present.
    pub fn completions_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
}

impl ChatRequest {
    /// OpenAI-style chat body; the wire format and the recorded request.
    pub fn to_body(&self) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": self.system},
                {"role": "user", "content": self.user},
            ],
        });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(s) = self.seed {
            body["seed"] = json!(s);
        }
        body
    }

    /// Inverse of [`ChatRequest::to_body`], for servers.
    pub fn from_body(body: &Value) -> Option<ChatRequest> {
        let messages = body.get("messages")?.as_array()?;
        let content = |role: &str| {
            messages
                .iter()
                .filter(|m| m.get("role").and_then(Value::as_str) == Some(role))
                .filter_map(|m| m.get("content").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join("\n")
        };
        Some(ChatRequest {
            model: body
                .get("model")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            system: content("system"),
            user: content("user"),
            temperature: body.get("temperature").and_then(Value::as_f64),
            seed: body.get("seed").and_then(Value::as_u64),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, o: Usage) {
        self.input_tokens += o.input_tokens;
        self.output_tokens += o.output_tokens;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
    /// Verbatim request and response bodies.
    pub raw_request: String,
    pub raw_response: String,
}

impl ChatResponse {
    /// Builds the OpenAI-style response body for `text`.
    pub fn body_for(text: &str, model: &str, usage: Usage) -> Value {
        json!({
            "object": "chat.completion",
            "model": model,
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": text},
                "finish_reason": "stop",
            }],
            "usage": {
                "prompt_tokens": usage.input_tokens,
                "completion_tokens": usage.output_tokens,
                "total_tokens": usage.input_tokens + usage.output_tokens,
            },
        })
    }

    /// Extracts the assistant text and usage from a response body.
    pub fn from_body(raw_request: String, raw_response: String) -> Result<ChatResponse, TransportError> {
        let v: Value = serde_json::from_str(&raw_response)
            .map_err(|e| TransportError::Decode(format!("response is not JSON: {e}")))?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| TransportError::Decode("missing choices[0].message.content".into()))?
            .to_string();
        let tokens = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).unwrap_or(0);
        Ok(ChatResponse {
            text,
            usage: Usage {
                input_tokens: tokens("prompt_tokens"),
                output_tokens: tokens("completion_tokens"),
            },
            raw_request,
            raw_response,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum TransportError {
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("cannot decode response: {0}")]
    Decode(String),
    #[error("missing auth token: environment variable {0} is not set")]
    MissingToken(String),
    #[error("scripted endpoint: {0}")]
    Script(String),
}

impl TransportError {
    /// Connection failures, 429 and 5xx are worth another try.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Connect(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Anything that answers chat requests: the HTTP client, scripted mocks.
pub trait ChatEndpoint: Send + Sync {
    /// Identifier used in usage accounting and provenance tags.
    fn id(&self) -> &str;
    /// Model name placed in requests.
    fn model(&self) -> &str {
        self.id()
    }
    fn default_temperature(&self) -> Option<f64> {
        None
    }
    fn default_seed(&self) -> Option<u64> {
        None
    }
    fn supports_seed(&self) -> bool {
        true
    }
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError>;
}

/// Blocking HTTP client for an OpenAI-compatible chat endpoint.
pub struct HttpEndpoint {
    config: ModelEndpoint,
    agent: ureq::Agent,
    token: Option<String>,
}

impl HttpEndpoint {
    /// Reads the bearer token from the configured environment variable.
    pub fn new(config: ModelEndpoint) -> Result<Self, ElicitError> {
        config.validate()?;
        let token = match &config.auth_token_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| ElicitError::Transport(TransportError::MissingToken(var.clone())))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpEndpoint { config, agent, token })
    }

    pub fn config(&self) -> &ModelEndpoint {
        &self.config
    }

    fn post_once(&self, url: &str, body: &str) -> Result<String, TransportError> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send(body).map_err(|e| TransportError::Connect(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Decode(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body: text });
        }
        Ok(text)
    }
}

impl ChatEndpoint for HttpEndpoint {
    fn id(&self) -> &str {
        self.config.id()
    }

    fn model(&self) -> &str {
        &self.config.model_id
    }

    fn default_temperature(&self) -> Option<f64> {
        self.config.temperature
    }

    fn default_seed(&self) -> Option<u64> {
        self.config.seed
    }

    fn supports_seed(&self) -> bool {
        self.config.supports_seed
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let url = self.config.completions_url();
        let body = request.to_body().to_string();
        let mut delay = Duration::from_millis(self.config.backoff_base_ms);
        let mut tries = 0;
        loop {
            match self.post_once(&url, &body) {
                Ok(text) => return ChatResponse::from_body(body, text),
                Err(e) if e.is_retryable() && tries < self.config.transport_retries => {
                    tries += 1;
                    log::warn!(
                        "{}: transport error ({e}), retry {tries}/{} in {delay:?}",
                        self.id(),
                        self.config.transport_retries
                    );
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
