use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::digest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
    /// Free-form label used for logging and call accounting.
    #[serde(default)]
    pub request_tag: String,
}

impl ChatRequest {
    /// Evaluation-style request: temperature 0.
    pub fn new(messages: Vec<ChatMessage>, max_output_tokens: u32) -> Self {
        Self {
            messages,
            temperature: 0.0,
            max_output_tokens,
            stop: None,
            request_tag: String::new(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.request_tag = tag.into();
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let first = self.messages.first().ok_or("messages must be non-empty")?;
        if first.role == Role::Assistant {
            return Err("first message must be a system or user message".into());
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(format!("temperature {} must be >= 0", self.temperature));
        }
        Ok(())
    }

    /// Stable request identity: SHA-256 (hex) of the canonical JSON object
    /// `{"max_output_tokens", "messages": [{"content", "role"}], "temperature"}`
    /// with keys in lexicographic order. The tag and stop list are excluded.
    pub fn fingerprint(&self) -> String {
        let messages: Vec<_> = self
            .messages
            .iter()
            .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        let canonical = json!({
            "messages": messages,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
        });
        sha256_hex(canonical.to_string().as_bytes())
    }

    /// Content of the last user message.
    pub fn last_user_content(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub usage: Usage,
    pub latency_ms: u64,
    pub attempts: u32,
}

impl ChatResponse {
    /// An empty completion is never reported as a clean stop.
    pub fn new(text: String, finish_reason: FinishReason, usage: Usage, latency_ms: u64, attempts: u32) -> Self {
        let finish_reason = if finish_reason == FinishReason::Stop && text.trim().is_empty() {
            FinishReason::Error
        } else {
            finish_reason
        };
        Self { text, finish_reason, usage, latency_ms, attempts }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    #[default]
    Remote,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, base_backoff_ms: 500 }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (attempts are 1-based).
    pub fn backoff_ms(&self, attempt: u32) -> u64 {
        self.base_backoff_ms.saturating_mul(1u64 << (attempt.saturating_sub(1)).min(20))
    }
}

fn default_parallel() -> usize {
    4
}

fn default_timeout() -> u64 {
    120_000
}

/// One chat-completion endpoint. `auth_env` names an environment variable
/// holding the bearer token; the secret itself is never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub endpoint_id: String,
    #[serde(default)]
    pub base_url: String,
    #[serde(default)]
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub kind: EndpointKind,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

impl EndpointConfig {
    pub fn remote(endpoint_id: impl Into<String>, base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_id: endpoint_id.into(),
            base_url: base_url.into(),
            model_name: model_name.into(),
            auth_env: None,
            max_parallel: default_parallel(),
            retry: RetryPolicy::default(),
            kind: EndpointKind::Remote,
            timeout_ms: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.endpoint_id.trim().is_empty() {
            return Err("endpoint_id must be non-empty".into());
        }
        if self.max_parallel < 1 {
            return Err(format!("{}: max_parallel must be >= 1", self.endpoint_id));
        }
        if self.retry.max_attempts < 1 {
            return Err(format!("{}: retry.max_attempts must be >= 1", self.endpoint_id));
        }
        if self.kind == EndpointKind::Remote && self.base_url.trim().is_empty() {
            return Err(format!("{}: remote endpoints need a base_url", self.endpoint_id));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_ignores_tag_but_not_temperature() {
        let base = ChatRequest::new(vec![ChatMessage::user("hi")], 64);
        let tagged = base.clone().with_tag("x");
        assert_eq!(base.fingerprint(), tagged.fingerprint());
        let warm = base.clone().with_temperature(0.7);
        assert_ne!(base.fingerprint(), warm.fingerprint());
    }

    #[test]
    fn request_validation() {
        assert!(ChatRequest::new(vec![], 1).validate().is_err());
        assert!(ChatRequest::new(vec![ChatMessage::assistant("x")], 1).validate().is_err());
        assert!(ChatRequest::new(vec![ChatMessage::system("s"), ChatMessage::user("u")], 1)
            .validate()
            .is_ok());
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy { max_attempts: 4, base_backoff_ms: 100 };
        assert_eq!([p.backoff_ms(1), p.backoff_ms(2), p.backoff_ms(3)], [100, 200, 400]);
    }

    #[test]
    fn empty_stop_becomes_error() {
        let r = ChatResponse::new(String::new(), FinishReason::Stop, Usage::default(), 0, 1);
        assert_eq!(r.finish_reason, FinishReason::Error);
    }
}
