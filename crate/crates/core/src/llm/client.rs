//! Chat-completions HTTP client with retries and a cap on concurrent requests.

use std::fmt;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LlmError, Message};

pub const API_KEY_ENV: &str = "COGHARNESS_API_KEY";
pub const API_BASE_ENV: &str = "COGHARNESS_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

/// Endpoint settings. The key is never serialized and `Debug` redacts it.
#[derive(Clone, Serialize, Deserialize)]
pub struct ChatEndpointConfig {
    pub base_url: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub model_name: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry waits this long; each later retry doubles it.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl ChatEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        ChatEndpointConfig {
            base_url: base_url.into(),
            api_key: None,
            model_name: model_name.into(),
            temperature: 1.0,
            timeout_secs: 60.0,
            max_retries: 4,
            backoff_ms: 500,
            max_in_flight: 8,
        }
    }

    /// Base URL and key from the environment.
    pub fn from_env(model_name: impl Into<String>) -> Self {
        let base = std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        ChatEndpointConfig { api_key: std::env::var(API_KEY_ENV).ok(), ..Self::new(base, model_name) }
    }
}

impl fmt::Debug for ChatEndpointConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChatEndpointConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("model_name", &self.model_name)
            .field("temperature", &self.temperature)
            .field("timeout_secs", &self.timeout_secs)
            .field("max_retries", &self.max_retries)
            .field("backoff_ms", &self.backoff_ms)
            .field("max_in_flight", &self.max_in_flight)
            .finish()
    }
}

/// Anything that turns a message list into a reply.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[Message], temperature: f64) -> Result<String, LlmError>;

    fn model_name(&self) -> String {
        "custom".into()
    }
}

impl<F> ChatBackend for F
where
    F: Fn(&[Message], f64) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, messages: &[Message], temperature: f64) -> Result<String, LlmError> {
        self(messages, temperature)
    }
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Blocking client. Clones share the in-flight cap.
#[derive(Clone)]
pub struct ChatClient {
    config: ChatEndpointConfig,
    http: reqwest::blocking::Client,
    slots: Arc<Slots>,
}

impl ChatClient {
    pub fn new(config: ChatEndpointConfig) -> Result<Self, LlmError> {
        if config.max_in_flight == 0 {
            return Err(LlmError::Config("max_in_flight must be at least 1".into()));
        }
        if !(config.timeout_secs > 0.0) {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let slots = Arc::new(Slots { free: Mutex::new(config.max_in_flight), cv: Condvar::new() });
        Ok(ChatClient { config, http, slots })
    }

    pub fn config(&self) -> &ChatEndpointConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Result<String, (bool, LlmError)> {
        let mut req = self.http.post(self.url()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| (true, LlmError::Transport(e.without_url().to_string())))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, LlmError::Transport(format!("HTTP {status}"))));
        }
        let text = resp.text().map_err(|e| (true, LlmError::Transport(e.without_url().to_string())))?;
        let v: Value =
            serde_json::from_str(&text).map_err(|e| (false, LlmError::Protocol(format!("body is not JSON: {e}"))))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| (false, LlmError::Protocol("no choices[0].message.content".into())))
    }
}

impl ChatBackend for ChatClient {
    fn complete(&self, messages: &[Message], temperature: f64) -> Result<String, LlmError> {
        let body = json!({ "model": self.config.model_name, "messages": messages, "temperature": temperature });
        let _slot = self.slots.acquire();
        let mut attempt = 0u32;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((true, e)) if attempt < self.config.max_retries => {
                    log::warn!("chat request failed ({e}); retry {} of {}", attempt + 1, self.config.max_retries);
                    std::thread::sleep(Duration::from_millis(
                        self.config.backoff_ms.saturating_mul(1 << attempt.min(20)),
                    ));
                    attempt += 1;
                }
                Err((_, e)) => return Err(e),
            }
        }
    }

    fn model_name(&self) -> String {
        self.config.model_name.clone()
    }
}

/// One request with `config`'s temperature.
pub fn chat_complete(config: &ChatEndpointConfig, messages: &[Message]) -> Result<String, LlmError> {
    ChatClient::new(config.clone())?.complete(messages, config.temperature)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_hidden() {
        let mut c = ChatEndpointConfig::new("http://x", "m");
        c.api_key = Some("sk-secret".into());
        assert!(!format!("{c:?}").contains("sk-secret"));
        assert!(!serde_json::to_string(&c).unwrap().contains("sk-secret"));
    }
}
