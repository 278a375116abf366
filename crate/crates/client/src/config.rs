//! Endpoint configuration. The API key is never stored here, only the name of
//! the environment variable that holds it.

use std::fmt;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ClientError;

/// Field names that look like an inline secret.
const SECRET_FIELDS: [&str; 6] = ["api_key", "apikey", "key", "token", "secret", "authorization"];

fn default_concurrency() -> usize {
    4
}

fn default_timeout() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles on each further attempt.
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_base_ms: 500,
        }
    }
}

impl RetryPolicy {
    /// Wait before attempt `attempt` (1-based), capped at one minute.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(2).min(16);
        Duration::from_millis((self.backoff_base_ms.saturating_mul(factor)).min(60_000))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            temperature: 0.0,
            max_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Root of the API, e.g. `https://host/v1`; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token. Omit for endpoints without auth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub sampling: Sampling,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: None,
            max_concurrent: default_concurrency(),
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            sampling: Sampling::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let text = std::fs::read_to_string(path).map_err(|e| ClientError::io(path, e))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| ClientError::Config(format!("{}: {e}", path.display())))?;
        if let Some(obj) = raw.as_object() {
            if let Some(k) = obj.keys().find(|k| SECRET_FIELDS.contains(&k.to_ascii_lowercase().as_str())) {
                return Err(ClientError::Config(format!(
                    "{}: field {k:?} looks like an inline secret; name an environment variable in api_key_env instead",
                    path.display()
                )));
            }
        }
        let cfg: EndpointConfig =
            serde_json::from_value(raw).map_err(|e| ClientError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let bad = |m: String| Err(ClientError::Config(m));
        match reqwest::Url::parse(&self.base_url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") => {}
            _ => return bad(format!("base_url {:?} is not an http(s) URL", self.base_url)),
        }
        if self.model.trim().is_empty() {
            return bad("model must not be empty".into());
        }
        if self.max_concurrent < 1 {
            return bad("max_concurrent must be at least 1".into());
        }
        if !(self.sampling.temperature.is_finite() && self.sampling.temperature >= 0.0) {
            return bad(format!("temperature must be >= 0, got {}", self.sampling.temperature));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return bad(format!("timeout_secs must be positive, got {}", self.timeout_secs));
        }
        if self.retry.max_attempts < 1 {
            return bad("retry.max_attempts must be at least 1".into());
        }
        if let Some(var) = &self.api_key_env {
            let ok = !var.is_empty()
                && var.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
                && !var.starts_with(|c: char| c.is_ascii_digit());
            if !ok {
                return bad(format!(
                    "api_key_env must name an environment variable (A-Z, 0-9, _), got {} characters that do not",
                    var.len()
                ));
            }
        }
        Ok(())
    }

    pub fn endpoint_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Reads the key from the environment, if one is configured.
    pub fn resolve_key(&self) -> Result<Option<ApiKey>, ClientError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(v) if !v.trim().is_empty() => Ok(Some(ApiKey(v.trim().to_string()))),
                _ => Err(ClientError::MissingKey(var.clone())),
            },
        }
    }
}

/// Bearer token read from the environment. Formatting never shows it.
#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub(crate) fn expose(&self) -> &str {
        &self.0
    }

    /// Replaces any occurrence of the key in `text`.
    pub fn scrub(&self, text: &str) -> String {
        if self.0.is_empty() {
            text.to_string()
        } else {
            text.replace(&self.0, "[redacted]")
        }
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey([redacted])")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_secrets_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.json");
        std::fs::write(&p, r#"{"base_url": "http://x/v1", "model": "m", "api_key": "sk-live-123"}"#).unwrap();
        let err = EndpointConfig::load(&p).unwrap_err().to_string();
        assert!(err.contains("api_key_env"), "{err}");
        assert!(!err.contains("sk-live-123"));
    }

    #[test]
    fn validation() {
        let mut c = EndpointConfig::new("http://localhost:1/v1", "m");
        assert!(c.validate().is_ok());
        c.max_concurrent = 0;
        assert!(c.validate().is_err());
        c.max_concurrent = 1;
        c.sampling.temperature = -0.1;
        assert!(c.validate().is_err());
        c.sampling.temperature = 0.0;
        c.api_key_env = Some("sk-abc".into());
        assert!(c.validate().is_err());
        c.api_key_env = Some("OPENAI_API_KEY".into());
        assert!(c.validate().is_ok());
        c.base_url = "localhost".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn key_debug_is_redacted() {
        let k = ApiKey("sk-secret".into());
        assert_eq!(format!("{k:?}"), "ApiKey([redacted])");
        assert_eq!(k.scrub("echo sk-secret back"), "echo [redacted] back");
    }

    #[test]
    fn backoff_doubles() {
        let r = RetryPolicy {
            max_attempts: 5,
            backoff_base_ms: 100,
        };
        let waits: Vec<u128> = (2..=5).map(|a| r.backoff(a).as_millis()).collect();
        assert_eq!(waits, [100, 200, 400, 800]);
    }
}
