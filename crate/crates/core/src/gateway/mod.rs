//! Chat-completion access for the planning and expert roles.
//!
//! [`Gateway`] wraps a [`ChatBackend`] with retries, a counting limiter of
//! `max_parallel` request slots and an append-only transcript. Backends are
//! either the OpenAI-compatible HTTP client or one of the deterministic mocks.

mod http;
mod mock;
mod transcript;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::HttpBackend;
pub use mock::{
    register_mock, AnswerTable, ConstantWrong, EchoOracle, IdentityPolisher, MockData, MockKind, ScriptedTranscript,
    StopwordStripper, TruthTable, WRONG_TOKEN, is_stopword,
};
pub use transcript::{read_transcript, sort_transcript_file, TranscriptWriter};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {0}")]
    HttpStatus(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<GatewayError> },
    #[error("transcript exhausted")]
    TranscriptExhausted,
    #[error("no transcript entry for request {0}")]
    TranscriptMismatch(String),
    #[error("replayed error: {0}")]
    Replayed(String),
    #[error("mock {mock} has no data for {what}")]
    MissingMockData { mock: &'static str, what: String },
    #[error("invalid gateway configuration: {0}")]
    InvalidConfig(String),
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("transcript {path}: {reason}")]
    Transcript { path: String, reason: String },
}

impl GatewayError {
    /// Failures worth retrying: timeouts, throttling, server errors and
    /// transport hiccups.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Timeout | GatewayError::Transport(_) => true,
            GatewayError::HttpStatus(code) => *code == 408 || *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub request_seed: u64,
    /// Send `request_seed` in the request body; otherwise it is only recorded.
    pub forward_seed: bool,
    pub max_parallel: usize,
    pub timeout_seconds: u64,
    pub retry_limit: u32,
    /// Base delay of the exponential backoff.
    pub backoff_ms: u64,
    /// Environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4o".into(),
            temperature: 0.0,
            request_seed: 12345,
            forward_seed: true,
            max_parallel: 4,
            timeout_seconds: 60,
            retry_limit: 3,
            backoff_ms: 500,
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

impl GatewayConfig {
    pub fn check(&self) -> Result<(), GatewayError> {
        if self.retry_limit > 5 {
            return Err(GatewayError::InvalidConfig(format!("retry_limit {} > 5", self.retry_limit)));
        }
        if !(1..=64).contains(&self.max_parallel) {
            return Err(GatewayError::InvalidConfig(format!(
                "max_parallel {} outside 1..=64",
                self.max_parallel
            )));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidConfig(format!("temperature {}", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    /// Caller-chosen stable key (e.g. `MVP/A0001`) used as the transcript id.
    pub request_key: Option<String>,
}

impl ChatRequest {
    pub fn hash(&self) -> String {
        request_hash(&self.system_text, &self.user_text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackendReply {
    pub text: String,
    pub latency_ms: u64,
    pub usage: TokenUsage,
}

/// One recorded chat call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub transcript_id: String,
    pub system_text: String,
    pub user_text: String,
    pub response_text: Option<String>,
    pub error: Option<String>,
    pub latency_ms: u64,
    pub usage: TokenUsage,
    pub request_hash: String,
    pub content_hash: String,
}

impl ChatExchange {
    pub fn is_ok(&self) -> bool {
        self.response_text.is_some()
    }
}

fn sha256_hex(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h.update([0u8]);
        }
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

pub fn request_hash(system_text: &str, user_text: &str) -> String {
    sha256_hex(&[system_text, user_text])
}

pub fn content_hash(system_text: &str, user_text: &str, outcome: &str) -> String {
    sha256_hex(&[system_text, user_text, outcome])
}

/// Anything that can answer a chat request.
pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;

    fn send(&self, cfg: &GatewayConfig, request: &ChatRequest) -> Result<BackendReply, GatewayError>;
}

/// Counting semaphore over request slots.
#[derive(Debug)]
pub struct Limiter {
    free: Mutex<usize>,
    released: Condvar,
}

pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Limiter {
    pub fn new(slots: usize) -> Self {
        Self {
            free: Mutex::new(slots.max(1)),
            released: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("limiter lock");
        while *free == 0 {
            free = self.released.wait(free).expect("limiter lock");
        }
        *free -= 1;
        Permit { limiter: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.limiter.free.lock().expect("limiter lock") += 1;
        self.limiter.released.notify_one();
    }
}

pub struct Gateway {
    cfg: GatewayConfig,
    backend: Box<dyn ChatBackend>,
    limiter: Limiter,
    transcript: Option<TranscriptWriter>,
    calls: AtomicUsize,
}

impl Gateway {
    pub fn new(cfg: GatewayConfig, backend: Box<dyn ChatBackend>) -> Result<Self, GatewayError> {
        cfg.check()?;
        Ok(Self {
            limiter: Limiter::new(cfg.max_parallel),
            cfg,
            backend,
            transcript: None,
            calls: AtomicUsize::new(0),
        })
    }

    /// Appends every exchange to `path` (created or truncated).
    pub fn with_transcript(mut self, path: &Path) -> Result<Self, GatewayError> {
        self.transcript = Some(TranscriptWriter::create(path)?);
        Ok(self)
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Number of `complete` calls so far.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, system_text: &str, user_text: &str) -> Result<ChatExchange, GatewayError> {
        self.complete_keyed(None, system_text, user_text)
    }

    /// Sends one request with retries and records exactly one transcript
    /// entry, whether it succeeds or not.
    pub fn complete_keyed(
        &self,
        key: Option<&str>,
        system_text: &str,
        user_text: &str,
    ) -> Result<ChatExchange, GatewayError> {
        if system_text.trim().is_empty() && user_text.trim().is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let request = ChatRequest {
            system_text: system_text.to_owned(),
            user_text: user_text.to_owned(),
            request_key: key.map(str::to_owned),
        };
        let rhash = request.hash();
        let outcome = {
            let _permit = self.limiter.acquire();
            self.send_with_retries(&request)
        };
        let (response_text, error, latency_ms, usage) = match &outcome {
            Ok(reply) => (Some(reply.text.clone()), None, reply.latency_ms, reply.usage),
            Err(e) => (None, Some(e.to_string()), 0, TokenUsage::default()),
        };
        let exchange = ChatExchange {
            transcript_id: key.map(str::to_owned).unwrap_or_else(|| rhash[..16].to_owned()),
            content_hash: content_hash(
                system_text,
                user_text,
                response_text.as_deref().or(error.as_deref()).unwrap_or_default(),
            ),
            system_text: request.system_text,
            user_text: request.user_text,
            response_text,
            error,
            latency_ms,
            usage,
            request_hash: rhash,
        };
        if let Some(t) = &self.transcript {
            t.append(&exchange)?;
        }
        outcome.map(|_| exchange)
    }

    fn send_with_retries(&self, request: &ChatRequest) -> Result<BackendReply, GatewayError> {
        let mut attempt: u32 = 0;
        loop {
            match self.backend.send(&self.cfg, request) {
                Ok(reply) => return Ok(reply),
                Err(e) if e.is_transient() => {
                    if attempt >= self.cfg.retry_limit {
                        return Err(GatewayError::RetriesExhausted {
                            attempts: attempt + 1,
                            last: Box::new(e),
                        });
                    }
                    let delay = self.cfg.backoff_ms.saturating_mul(1u64 << attempt.min(16));
                    thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
