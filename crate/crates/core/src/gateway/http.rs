use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BackendReply, ChatBackend, ChatRequest, GatewayConfig, GatewayError, TokenUsage};

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpBackend {
    /// Reads the API key from `cfg.api_key_env` if set.
    pub fn new(cfg: &GatewayConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_seconds.max(1)))
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self { client, api_key })
    }
}

impl ChatBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn send(&self, cfg: &GatewayConfig, request: &ChatRequest) -> Result<BackendReply, GatewayError> {
        let mut messages = Vec::with_capacity(2);
        if !request.system_text.is_empty() {
            messages.push(Message {
                role: "system",
                content: &request.system_text,
            });
        }
        messages.push(Message {
            role: "user",
            content: &request.user_text,
        });
        let body = CompletionRequest {
            model: &cfg.model_name,
            messages,
            temperature: cfg.temperature,
            seed: cfg.forward_seed.then_some(cfg.request_seed),
        };
        let url = format!("{}/chat/completions", cfg.endpoint_url.trim_end_matches('/'));
        let mut builder = self.client.post(url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let started = Instant::now();
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(GatewayError::HttpStatus(status.as_u16()));
        }
        let text = response.text().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let latency_ms = started.elapsed().as_millis() as u64;
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::MalformedResponse("no message content".into()))?;
        let usage = parsed
            .usage
            .map(|u| TokenUsage {
                prompt: u.prompt_tokens,
                completion: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(BackendReply {
            text: content,
            latency_ms,
            usage,
        })
    }
}
