//! Provider wire dialects over a pluggable HTTP transport.
//!
//! Credentials come from environment variables and only ever travel in
//! request headers, so request bodies can be logged verbatim.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::{ImageDetail, MockProvider, Part, Prompt, ProviderClient, ProviderError};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

pub trait HttpTransport: Send + Sync {
    /// POSTs a JSON body. `Err` means no HTTP response was received.
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &Value) -> Result<HttpReply, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(ReqwestTransport { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &Value) -> Result<HttpReply, String> {
        let mut req = self
            .client
            .post(url)
            .header("content-type", "application/json")
            .body(serde_json::to_vec(body).map_err(|e| e.to_string())?);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

fn classify(reply: HttpReply) -> Result<Value, ProviderError> {
    let snippet: String = reply.body.chars().take(300).collect();
    match reply.status {
        200..=299 => serde_json::from_str(&reply.body)
            .map_err(|e| ProviderError::Transient(format!("malformed response body: {e}"))),
        429 => Err(ProviderError::RateLimited(snippet)),
        408 | 500..=599 => Err(ProviderError::Transient(format!("HTTP {}: {snippet}", reply.status))),
        s => Err(ProviderError::Fatal(format!("HTTP {s}: {snippet}"))),
    }
}

fn send(
    transport: &dyn HttpTransport,
    debug_wire: bool,
    url: &str,
    headers: &[(String, String)],
    body: &Value,
) -> Result<Value, ProviderError> {
    if debug_wire {
        let redacted: Vec<(String, &str)> = headers.iter().map(|(k, _)| (k.clone(), "<redacted>")).collect();
        tracing::info!(target: "vsc::wire", url, headers = ?redacted, body = %body, "request");
    }
    let reply = transport.post_json(url, headers, body).map_err(ProviderError::Transient)?;
    classify(reply)
}

fn data_url(media_type: &str, data: &str) -> String {
    format!("data:{media_type};base64,{data}")
}

/// OpenAI-style chat completions.
pub struct OpenAiChat {
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    pub debug_wire: bool,
    pub transport: Arc<dyn HttpTransport>,
}

impl OpenAiChat {
    pub fn request_body(&self, prompt: &Prompt) -> Value {
        let content: Vec<Value> = prompt
            .parts
            .iter()
            .map(|p| match p {
                Part::Text { text } => json!({"type": "text", "text": text}),
                Part::Image { media_type, data, detail } => {
                    let detail = match detail {
                        ImageDetail::Auto => "auto",
                        ImageDetail::Low => "low",
                    };
                    json!({"type": "image_url", "image_url": {"url": data_url(media_type, data), "detail": detail}})
                }
            })
            .collect();
        json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": content},
            ],
        })
    }

    pub fn extract_text(v: &Value) -> Result<String, ProviderError> {
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Transient("response lacks choices[0].message.content".into()))
    }
}

impl ProviderClient for OpenAiChat {
    fn provider(&self) -> &str {
        "openai"
    }
    fn model(&self) -> &str {
        &self.model
    }
    fn complete(&self, prompt: &Prompt) -> Result<String, ProviderError> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let headers = vec![("authorization".to_string(), format!("Bearer {}", self.api_key))];
        let v = send(self.transport.as_ref(), self.debug_wire, &url, &headers, &self.request_body(prompt))?;
        Self::extract_text(&v)
    }
}

/// Anthropic-style messages API.
pub struct AnthropicMessages {
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    pub max_tokens: u32,
    pub debug_wire: bool,
    pub transport: Arc<dyn HttpTransport>,
}

impl AnthropicMessages {
    pub const API_VERSION: &'static str = "2023-06-01";

    pub fn request_body(&self, prompt: &Prompt) -> Value {
        let content: Vec<Value> = prompt
            .parts
            .iter()
            .map(|p| match p {
                Part::Text { text } => json!({"type": "text", "text": text}),
                Part::Image { media_type, data, .. } => json!({
                    "type": "image",
                    "source": {"type": "base64", "media_type": media_type, "data": data},
                }),
            })
            .collect();
        json!({
            "model": self.model,
            "max_tokens": self.max_tokens,
            "temperature": 0,
            "system": prompt.system_text,
            "messages": [{"role": "user", "content": content}],
        })
    }

    pub fn extract_text(v: &Value) -> Result<String, ProviderError> {
        let blocks = v
            .get("content")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Transient("response lacks content".into()))?;
        Ok(blocks
            .iter()
            .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
            .filter_map(|b| b.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(""))
    }
}

impl ProviderClient for AnthropicMessages {
    fn provider(&self) -> &str {
        "anthropic"
    }
    fn model(&self) -> &str {
        &self.model
    }
    fn complete(&self, prompt: &Prompt) -> Result<String, ProviderError> {
        let url = format!("{}/messages", self.base_url.trim_end_matches('/'));
        let headers = vec![
            ("x-api-key".to_string(), self.api_key.clone()),
            ("anthropic-version".to_string(), Self::API_VERSION.to_string()),
        ];
        let v = send(self.transport.as_ref(), self.debug_wire, &url, &headers, &self.request_body(prompt))?;
        Self::extract_text(&v)
    }
}

/// Gemini-style generateContent.
pub struct GeminiGenerate {
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    pub debug_wire: bool,
    pub transport: Arc<dyn HttpTransport>,
}

impl GeminiGenerate {
    pub fn request_body(&self, prompt: &Prompt) -> Value {
        let parts: Vec<Value> = prompt
            .parts
            .iter()
            .map(|p| match p {
                Part::Text { text } => json!({"text": text}),
                Part::Image { media_type, data, .. } => {
                    json!({"inline_data": {"mime_type": media_type, "data": data}})
                }
            })
            .collect();
        json!({
            "systemInstruction": {"parts": [{"text": prompt.system_text}]},
            "contents": [{"role": "user", "parts": parts}],
            "generationConfig": {"temperature": 0},
        })
    }

    pub fn extract_text(v: &Value) -> Result<String, ProviderError> {
        let parts = v
            .pointer("/candidates/0/content/parts")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Transient("response lacks candidates[0].content.parts".into()))?;
        Ok(parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect::<Vec<_>>().join(""))
    }
}

impl ProviderClient for GeminiGenerate {
    fn provider(&self) -> &str {
        "gemini"
    }
    fn model(&self) -> &str {
        &self.model
    }
    fn complete(&self, prompt: &Prompt) -> Result<String, ProviderError> {
        let url = format!("{}/models/{}:generateContent", self.base_url.trim_end_matches('/'), self.model);
        let headers = vec![("x-goog-api-key".to_string(), self.api_key.clone())];
        let v = send(self.transport.as_ref(), self.debug_wire, &url, &headers, &self.request_body(prompt))?;
        Self::extract_text(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    OpenAi,
    Anthropic,
    Gemini,
    Mock,
}

impl ProviderKind {
    /// Environment variable holding the API key.
    pub fn key_var(self) -> Option<&'static str> {
        match self {
            ProviderKind::OpenAi => Some("OPENAI_API_KEY"),
            ProviderKind::Anthropic => Some("ANTHROPIC_API_KEY"),
            ProviderKind::Gemini => Some("GEMINI_API_KEY"),
            ProviderKind::Mock => None,
        }
    }

    /// Environment variable overriding the endpoint base URL.
    pub fn base_url_var(self) -> Option<&'static str> {
        match self {
            ProviderKind::OpenAi => Some("OPENAI_BASE_URL"),
            ProviderKind::Anthropic => Some("ANTHROPIC_BASE_URL"),
            ProviderKind::Gemini => Some("GEMINI_BASE_URL"),
            ProviderKind::Mock => None,
        }
    }

    pub fn default_base_url(self) -> &'static str {
        match self {
            ProviderKind::OpenAi => "https://api.openai.com/v1",
            ProviderKind::Anthropic => "https://api.anthropic.com/v1",
            ProviderKind::Gemini => "https://generativelanguage.googleapis.com/v1beta",
            ProviderKind::Mock => "",
        }
    }
}

impl FromStr for ProviderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "openai" => Ok(ProviderKind::OpenAi),
            "anthropic" => Ok(ProviderKind::Anthropic),
            "gemini" => Ok(ProviderKind::Gemini),
            "mock" => Ok(ProviderKind::Mock),
            o => Err(Error::Config(format!("unknown provider `{o}` (openai, anthropic, gemini, mock)"))),
        }
    }
}

/// Builds a provider, reading credentials through `env`. Missing credentials
/// are a configuration error.
pub fn build_provider(
    kind: ProviderKind,
    model: &str,
    env: &dyn Fn(&str) -> Option<String>,
    transport: Arc<dyn HttpTransport>,
    debug_wire: bool,
) -> Result<Box<dyn ProviderClient>> {
    if kind == ProviderKind::Mock {
        return Ok(Box::new(MockProvider::new(model)));
    }
    let key_var = kind.key_var().expect("network providers have a key variable");
    let api_key = env(key_var)
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Error::Config(format!("missing credentials: set {key_var}")))?;
    let base_url = kind
        .base_url_var()
        .and_then(env)
        .unwrap_or_else(|| kind.default_base_url().to_string());
    let model = model.to_string();
    Ok(match kind {
        ProviderKind::OpenAi => Box::new(OpenAiChat { base_url, api_key, model, debug_wire, transport }),
        ProviderKind::Anthropic => {
            Box::new(AnthropicMessages { base_url, api_key, model, max_tokens: 64, debug_wire, transport })
        }
        ProviderKind::Gemini => Box::new(GeminiGenerate { base_url, api_key, model, debug_wire, transport }),
        ProviderKind::Mock => unreachable!(),
    })
}
