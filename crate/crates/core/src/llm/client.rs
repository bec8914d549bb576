use std::time::{Duration, Instant};

use futures::future::BoxFuture;
use rand::Rng;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::{EndpointConfig, LlmError};

/// A finished completion and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
    pub finish_reason: Option<String>,
    #[serde(with = "millis")]
    pub latency: Duration,
}

/// Anything that turns a prompt into text: the HTTP client or a mock.
pub trait Completer: Send + Sync {
    fn complete<'a>(&'a self, prompt: &'a str) -> BoxFuture<'a, Result<Completion, LlmError>>;

    /// Short description for provenance records.
    fn describe(&self) -> String;
}

/// Full-jitter exponential backoff: before retry `k` (1-based) the client
/// sleeps a uniform draw from `[0, base · 2^(k−1)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
}

impl Backoff {
    pub const FACTOR: u32 = 2;

    pub fn ceiling(&self, retry: u32) -> Duration {
        let exp = retry.saturating_sub(1).min(30);
        self.base.saturating_mul(Self::FACTOR.saturating_pow(exp))
    }

    pub fn delay<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        self.ceiling(retry).mul_f64(rng.random::<f64>())
    }
}

/// Client for `POST {base_url}/chat/completions`.
#[derive(Debug, Clone)]
pub struct HttpCompleter {
    config: EndpointConfig,
    http: reqwest::Client,
}

impl HttpCompleter {
    pub fn new(config: EndpointConfig) -> Result<HttpCompleter, LlmError> {
        config.validate()?;
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpCompleter { config, http })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn body(&self, prompt: &str) -> serde_json::Value {
        let mut messages = Vec::new();
        if let Some(sys) = &self.config.system_prompt {
            messages.push(serde_json::json!({"role": "system", "content": sys}));
        }
        messages.push(serde_json::json!({"role": "user", "content": prompt}));
        serde_json::json!({
            "model": self.config.model_name,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        })
    }

    async fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let mut req = self.http.post(self.config.completions_url()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key.expose());
        }
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Transient { status: None, reason: "timeout".into() },
            Err(e) => return Attempt::Transient { status: None, reason: format!("transport: {}", without_url(&e)) },
        };
        let status = resp.status();
        if status.is_success() {
            return match resp.text().await {
                Ok(text) => match parse_chat_response(&text) {
                    Ok((t, f)) => Attempt::Done(t, f),
                    Err(e) => Attempt::Fatal(e),
                },
                Err(e) if e.is_timeout() => Attempt::Transient { status: None, reason: "timeout".into() },
                Err(e) => Attempt::Transient { status: None, reason: format!("transport: {}", without_url(&e)) },
            };
        }
        let snippet: String = resp.text().await.unwrap_or_default().chars().take(300).collect();
        match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Attempt::Fatal(LlmError::Auth { status: status.as_u16(), attempts: 1 }),
            s if s == StatusCode::TOO_MANY_REQUESTS || s.is_server_error() => {
                Attempt::Transient { status: Some(s.as_u16()), reason: format!("HTTP {}", s.as_u16()) }
            }
            s => Attempt::Fatal(LlmError::Rejected { status: s.as_u16(), body: snippet, attempts: 1 }),
        }
    }
}

enum Attempt {
    Done(String, Option<String>),
    Transient { status: Option<u16>, reason: String },
    Fatal(LlmError),
}

/// reqwest errors may embed the request URL; mask it.
fn without_url(e: &reqwest::Error) -> String {
    let s = e.to_string();
    match e.url() {
        Some(u) => s.replace(u.as_str(), "<endpoint>"),
        None => s,
    }
}

impl Completer for HttpCompleter {
    fn complete<'a>(&'a self, prompt: &'a str) -> BoxFuture<'a, Result<Completion, LlmError>> {
        Box::pin(async move {
            let body = self.body(prompt);
            let backoff = Backoff { base: self.config.backoff_base };
            let started = Instant::now();
            let max_attempts = self.config.max_retries + 1;
            let mut last_status = None;
            let mut last_reason = String::new();
            for attempt in 1..=max_attempts {
                match self.attempt(&body).await {
                    Attempt::Done(text, finish_reason) => {
                        debug!(attempt, "completion ok");
                        return Ok(Completion { text, attempts: attempt, finish_reason, latency: started.elapsed() });
                    }
                    Attempt::Fatal(e) => return Err(e.at_attempt(attempt)),
                    Attempt::Transient { status, reason } => {
                        warn!(attempt, %reason, "transient failure");
                        last_status = status;
                        last_reason = reason;
                        if attempt < max_attempts {
                            let wait = backoff.delay(attempt, &mut rand::rng());
                            tokio::time::sleep(wait).await;
                        }
                    }
                }
            }
            Err(LlmError::ExhaustedRetries { attempts: max_attempts, last_status, last_error: last_reason })
        })
    }

    fn describe(&self) -> String {
        format!("{} via {}", self.config.model_name, self.config.base_url)
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

fn malformed(message: String) -> LlmError {
    LlmError::MalformedResponse { message, attempts: 1 }
}

/// Assistant text and finish reason from a chat-completions body.
pub fn parse_chat_response(body: &str) -> Result<(String, Option<String>), LlmError> {
    let resp: ChatResponse = serde_json::from_str(body).map_err(|e| malformed(e.to_string()))?;
    let choice = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| malformed("no choices".into()))?;
    let text = choice
        .message
        .content
        .ok_or_else(|| malformed("message has no content".into()))?;
    Ok((text, choice.finish_reason))
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Duration::try_from_secs_f64(ms / 1000.0).map_err(serde::de::Error::custom)
    }
}
