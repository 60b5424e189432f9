//! Prompt construction, provider dispatch, response parsing and caching.

mod cache;
mod mock;
mod parse;
mod prompt;
mod wire;

pub use cache::{request_hash, CacheEntry, ResponseCache};
pub use mock::MockProvider;
pub use parse::{normalize, parse_label, ParseOptions, DEFAULT_REFUSAL_PHRASES};
pub use prompt::{
    build_few_shot_prompt, build_zero_shot_prompt, class_list_literal, exemplar_caption, zero_shot_text,
    ImageDetail, Part, Prompt, FEW_SHOT_CLOSING, FEW_SHOT_INTRO, PNG_MEDIA_TYPE, PROMPT_TEMPLATE_VERSION,
    SYSTEM_TEXT,
};
pub use wire::{
    build_provider, AnthropicMessages, GeminiGenerate, HttpReply, HttpTransport, OpenAiChat, ProviderKind,
    ReqwestTransport,
};

use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    Unparseable,
    Refused,
    TransportError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub raw_text: String,
    pub parsed_label: Option<String>,
    pub status: ResponseStatus,
    pub provider: String,
    pub latency_ms: u64,
    pub request_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("request failed: {0}")]
    Fatal(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        !matches!(self, ProviderError::Fatal(_))
    }
}

/// One wire dialect (or the offline mock) bound to a model id.
pub trait ProviderClient: Send + Sync {
    fn provider(&self) -> &str;
    fn model(&self) -> &str;
    fn complete(&self, prompt: &Prompt) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay_ms: 1000, max_delay_ms: 30_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): base · 2^(retry-1), capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u64 << (retry.saturating_sub(1)).min(30);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

pub struct QueryContext<'a> {
    pub cache: Option<&'a ResponseCache>,
    pub retry: RetryPolicy,
    pub parse: ParseOptions,
    /// Cache misses become transport errors instead of provider calls.
    pub offline: bool,
    pub sleep: fn(Duration),
}

impl Default for QueryContext<'_> {
    fn default() -> Self {
        QueryContext {
            cache: None,
            retry: RetryPolicy::default(),
            parse: ParseOptions::default(),
            offline: false,
            sleep: std::thread::sleep,
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Sends `prompt` through the cache, retrying transient failures.
///
/// Transport failures are reported as a response with
/// [`ResponseStatus::TransportError`] and are not cached.
pub fn query(provider: &dyn ProviderClient, prompt: &Prompt, ctx: &QueryContext<'_>) -> ModelResponse {
    let hash = request_hash(provider.provider(), provider.model(), prompt);
    if let Some(hit) = ctx.cache.and_then(|c| c.get(&hash)) {
        return hit.response;
    }
    let failure = |msg: String, latency_ms: u64| ModelResponse {
        raw_text: msg,
        parsed_label: None,
        status: ResponseStatus::TransportError,
        provider: provider.provider().to_string(),
        latency_ms,
        request_hash: hash.clone(),
    };
    if ctx.offline {
        return failure("offline: request not in cache".into(), 0);
    }
    let start = Instant::now();
    let mut attempt = 1;
    let raw = loop {
        match provider.complete(prompt) {
            Ok(text) => break text,
            Err(e) if e.is_retryable() && attempt < ctx.retry.max_attempts => {
                let wait = ctx.retry.delay(attempt);
                tracing::warn!(provider = provider.provider(), attempt, ?wait, error = %e, "retrying request");
                (ctx.sleep)(wait);
                attempt += 1;
            }
            Err(e) => {
                return failure(format!("{e} (after {attempt} attempts)"), start.elapsed().as_millis() as u64);
            }
        }
    };
    let (parsed_label, status) = parse_label(&raw, &prompt.class_list, &ctx.parse);
    let response = ModelResponse {
        raw_text: raw,
        parsed_label,
        status,
        provider: provider.provider().to_string(),
        latency_ms: start.elapsed().as_millis() as u64,
        request_hash: hash.clone(),
    };
    if let Some(cache) = ctx.cache {
        let entry = CacheEntry { request_hash: hash, response: response.clone(), timestamp_unix_ms: now_ms() };
        if let Err(e) = cache.put(entry) {
            tracing::error!(error = %e, "failed to append to response cache");
        }
    }
    response
}
