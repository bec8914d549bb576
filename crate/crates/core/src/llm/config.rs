use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use url::Url;

use super::LlmError;

/// An API key. Debug and Display print a placeholder; it is never
/// serialized.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Secret {
        Secret(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(<redacted>)")
    }
}

impl fmt::Display for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<redacted>")
    }
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

/// Handle on an OpenAI-compatible chat-completions endpoint.
///
/// `base_url` is the API root including any version segment, e.g.
/// `http://localhost:8000/v1`; requests go to `{base_url}/chat/completions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: Url,
    #[serde(skip)]
    pub api_key: Option<Secret>,
    /// Environment variable the key is read from.
    pub api_key_env: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// First retry waits up to this long; each later one doubles the ceiling.
    #[serde(with = "secs")]
    pub backoff_base: Duration,
    pub system_prompt: Option<String>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: Url::parse("http://localhost:8000/v1").expect("valid url"),
            api_key: None,
            api_key_env: default_key_env(),
            model_name: "gpt-4o".into(),
            temperature: 0.7,
            max_output_tokens: 2048,
            timeout: Duration::from_secs(120),
            max_retries: 3,
            max_in_flight: 4,
            backoff_base: Duration::from_secs(1),
            system_prompt: None,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: String| Err(LlmError::InvalidConfig(m));
        if !matches!(self.base_url.scheme(), "http" | "https") || self.base_url.host().is_none() {
            return bad(format!("base_url must be an http(s) URL, got {}", self.base_url));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1".into());
        }
        if self.timeout.is_zero() {
            return bad("timeout must be positive".into());
        }
        Ok(())
    }

    /// Reads the key from `api_key_env` when it is set and non-empty.
    pub fn with_key_from_env(mut self) -> Self {
        if let Ok(k) = std::env::var(&self.api_key_env) {
            if !k.is_empty() {
                self.api_key = Some(Secret::new(k));
            }
        }
        self
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.as_str().trim_end_matches('/'))
    }

    /// Fields safe to persist in manifests and generation records.
    pub fn redacted(&self) -> RedactedEndpoint {
        RedactedEndpoint {
            base_url: self.base_url.to_string(),
            model_name: self.model_name.clone(),
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            timeout_secs: self.timeout.as_secs_f64(),
            max_retries: self.max_retries,
            max_in_flight: self.max_in_flight,
            api_key_env: self.api_key_env.clone(),
            api_key_set: self.api_key.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedactedEndpoint {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub api_key_env: String,
    pub api_key_set: bool,
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}
