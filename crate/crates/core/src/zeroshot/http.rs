use std::path::Path;

use base64::Engine;
use serde_json::{json, Value};

use super::client::{Completion, CompletionClient, CompletionRequest};
use super::response::TokenUsage;
use crate::{Error, Result};

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "OPENROUTER_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://openrouter.ai/api/v1/chat/completions";

/// Chat-completion transport for OpenRouter-compatible endpoints.
pub struct HttpClient {
    endpoint: String,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient")
            .field("endpoint", &self.endpoint)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(300))
            .build()
            .map_err(|e| Error::TransportFailure(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            http,
        })
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(endpoint: Option<&str>) -> Result<Self> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| Error::InvalidConfig(format!("{API_KEY_ENV} is not set")))?;
        Self::new(endpoint.unwrap_or(DEFAULT_ENDPOINT), key)
    }
}

fn image_part(reference: &str) -> Result<Value> {
    let url = if reference.starts_with("http://")
        || reference.starts_with("https://")
        || reference.starts_with("data:")
    {
        reference.to_string()
    } else {
        let path = Path::new(reference);
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mime = match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("png") => "image/png",
            Some("webp") => "image/webp",
            _ => "image/jpeg",
        };
        format!(
            "data:{mime};base64,{}",
            base64::engine::general_purpose::STANDARD.encode(bytes)
        )
    };
    Ok(json!({"type": "image_url", "image_url": {"url": url}}))
}

fn body(req: &CompletionRequest) -> Result<Value> {
    let mut content = vec![json!({"type": "text", "text": req.prompt})];
    if !req.metadata_summary.is_empty() {
        content
            .push(json!({"type": "text", "text": format!("Metadata: {}", req.metadata_summary)}));
    }
    for r in &req.image_refs {
        content.push(image_part(r)?);
    }
    let schema = json!({
        "type": "object",
        "properties": {
            "labels": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "name": {"type": "string", "enum": req.candidates},
                        "confidence": {"type": "integer", "minimum": 1, "maximum": 5},
                        "reason": {"type": "string"}
                    },
                    "required": ["name", "confidence", "reason"],
                    "additionalProperties": false
                }
            }
        },
        "required": ["labels"],
        "additionalProperties": false
    });
    Ok(json!({
        "model": req.model,
        "temperature": req.temperature,
        "messages": [{"role": "user", "content": content}],
        "response_format": {
            "type": "json_schema",
            "json_schema": {"name": format!("{}_ranking", req.class_type), "strict": true, "schema": schema}
        }
    }))
}

impl CompletionClient for HttpClient {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        let fail = |e: reqwest::Error| Error::TransportFailure(e.without_url().to_string());
        let resp = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body(request)?)
            .send()
            .map_err(fail)?;
        let status = resp.status();
        let value: Value = resp.json().map_err(fail)?;
        if !status.is_success() {
            let msg = value
                .pointer("/error/message")
                .and_then(Value::as_str)
                .unwrap_or("");
            return Err(Error::TransportFailure(format!("HTTP {status}: {msg}")));
        }
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::TransportFailure("response has no message content".into()))?;
        let count = |p: &str| value.pointer(p).and_then(Value::as_u64).unwrap_or(0);
        Ok(Completion {
            text: text.to_string(),
            usage: TokenUsage {
                input: count("/usage/prompt_tokens"),
                output: count("/usage/completion_tokens"),
            },
        })
    }
}
