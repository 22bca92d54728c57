//! Blocking client for chat-style text-generation endpoints.
//!
//! Request body: `{model, messages: [{role, content}], temperature}`. The
//! generated text is read from a configurable dotted path in the response
//! JSON (`choices.0.message.content` by default). The credential is read
//! from the environment variable named in the config and sent as a bearer
//! token; it never appears in errors or logs.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

fn default_temperature() -> f64 {
    0.0
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_path() -> String {
    "choices.0.message.content".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteBackendConfig {
    pub endpoint_url: String,
    pub api_key_env: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_path")]
    pub response_path: String,
}

impl RemoteBackendConfig {
    pub fn new(endpoint_url: &str, api_key_env: &str, model_name: &str) -> Self {
        RemoteBackendConfig {
            endpoint_url: endpoint_url.into(),
            api_key_env: api_key_env.into(),
            model_name: model_name.into(),
            temperature: default_temperature(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            response_path: default_path(),
        }
    }
}

pub struct ChatClient {
    cfg: RemoteBackendConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(String),
    Fail(Error),
}

impl ChatClient {
    pub fn new(cfg: RemoteBackendConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        ChatClient { cfg, agent }
    }

    pub fn config(&self) -> &RemoteBackendConfig {
        &self.cfg
    }

    fn credential(&self) -> Result<String> {
        match std::env::var(&self.cfg.api_key_env) {
            Ok(v) if !v.is_empty() => Ok(v),
            _ => Err(Error::Credential(format!(
                "environment variable {} is not set",
                self.cfg.api_key_env
            ))),
        }
    }

    /// Sends one user message and returns the generated text, retrying
    /// transport failures and 5xx/429 responses with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let key = self.credential()?;
        let body = json!({
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        })
        .to_string();

        let attempts = self.cfg.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.attempt(&key, &body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(reason)) => {
                    log::warn!("remote attempt {} of {attempts} failed: {reason}", attempt + 1);
                    last = reason;
                }
            }
        }
        Err(Error::BackendUnavailable(format!(
            "{} after {attempts} attempts: {last}",
            self.cfg.endpoint_url
        )))
    }

    fn attempt(&self, key: &str, body: &str) -> std::result::Result<String, Attempt> {
        let resp = self
            .agent
            .post(&self.cfg.endpoint_url)
            .header("Authorization", &format!("Bearer {key}"))
            .content_type("application/json")
            .send(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(ureq::Error::BadUri(u)) => {
                return Err(Attempt::Fail(Error::Config(format!("bad endpoint url {u}"))))
            }
            Err(e) => return Err(Attempt::Retry(e.to_string())),
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => {
                return Err(Attempt::Fail(Error::Credential(format!(
                    "endpoint rejected the credential (HTTP {status})"
                ))))
            }
            429 | 500..=599 => return Err(Attempt::Retry(format!("HTTP {status}"))),
            _ => return Err(Attempt::Fail(Error::Protocol(format!("unexpected HTTP {status}")))),
        }
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fail(Error::Protocol(format!("response is not JSON: {e}"))))?;
        extract_path(&value, &self.cfg.response_path)
            .map(str::to_string)
            .ok_or_else(|| {
                Attempt::Fail(Error::Protocol(format!(
                    "no string at response path {}",
                    self.cfg.response_path
                )))
            })
    }
}

/// Follows a dotted path; numeric segments index arrays.
pub fn extract_path<'a>(value: &'a Value, path: &str) -> Option<&'a str> {
    let mut cur = value;
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        cur = match cur {
            Value::Array(items) => items.get(seg.parse::<usize>().ok()?)?,
            Value::Object(map) => map.get(seg)?,
            _ => return None,
        };
    }
    cur.as_str()
}
