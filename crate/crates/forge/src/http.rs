//! OpenAI-compatible chat-completions backend.

use std::time::{Duration, Instant};

use forge_core::llm::{CallContext, ChatBackend, CompletionResult, GenerationConfig, LlmError, RenderedPrompt, Usage};
use serde_json::{json, Value};

pub const API_KEY_VAR: &str = "FORGE_API_KEY";
pub const API_BASE_VAR: &str = "FORGE_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

pub struct HttpBackend {
    base: String,
    api_key: Option<String>,
    model: String,
    agent: ureq::Agent,
    pub attempts: u32,
    pub backoff: Duration,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("base", &self.base).field("model", &self.model).finish_non_exhaustive()
    }
}

enum Failure {
    Transient(String),
    Permanent(String),
}

impl HttpBackend {
    pub fn new(base: &str, api_key: Option<String>, model: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Self {
            base: base.trim_end_matches('/').to_owned(),
            api_key,
            model: model.to_owned(),
            agent,
            attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }

    /// Endpoint and key from `FORGE_API_BASE` / `FORGE_API_KEY`.
    pub fn from_env(model: &str) -> Self {
        let base = std::env::var(API_BASE_VAR).unwrap_or_else(|_| DEFAULT_API_BASE.to_owned());
        Self::new(&base, std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()), model)
    }

    pub fn request_body(&self, prompt: &RenderedPrompt, config: &GenerationConfig) -> Value {
        json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_new_tokens,
            "n": config.n,
        })
    }

    fn attempt(&self, body: &Value) -> Result<(String, String, Option<Usage>), Failure> {
        let mut req = self.agent.post(format!("{}/chat/completions", self.base));
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| Failure::Transient(e.to_string()))?;
        match status {
            200..=299 => parse_response(&text, &self.model).map_err(Failure::Permanent),
            500..=599 => Err(Failure::Transient(format!("HTTP {status}"))),
            _ => Err(Failure::Permanent(format!("HTTP {status}: {}", snippet(&text)))),
        }
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

/// Extracts `(text, model, usage)` from a chat-completions response body.
pub fn parse_response(body: &str, requested_model: &str) -> Result<(String, String, Option<Usage>), String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("bad response JSON: {e}"))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| format!("response lacks choices[0].message.content: {}", snippet(body)))?;
    let model = v.get("model").and_then(Value::as_str).unwrap_or(requested_model);
    let usage = v.get("usage").and_then(|u| {
        Some(Usage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64()?,
        })
    });
    Ok((text.to_owned(), model.to_owned(), usage))
}

impl ChatBackend for HttpBackend {
    fn complete(
        &self,
        ctx: CallContext<'_>,
        prompt: &RenderedPrompt,
        config: &GenerationConfig,
    ) -> Result<CompletionResult, LlmError> {
        config.validate()?;
        let body = self.request_body(prompt, config);
        let started = Instant::now();
        let mut last = String::new();
        for attempt in 1..=self.attempts.max(1) {
            match self.attempt(&body) {
                Ok((text, model_id, usage)) => {
                    return Ok(CompletionResult { text, model_id, latency: started.elapsed(), usage });
                }
                Err(Failure::Permanent(msg)) => return Err(LlmError::BackendFailure(msg)),
                Err(Failure::Transient(msg)) => {
                    tracing::warn!(key = %ctx.key(), attempt, "transient backend error: {msg}");
                    last = msg;
                    if attempt < self.attempts {
                        std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
                    }
                }
            }
        }
        Err(LlmError::BackendFailure(format!("gave up after {} attempts: {last}", self.attempts)))
    }

    fn describe(&self) -> String {
        format!("openai-compatible {} at {}", self.model, self.base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_content_and_usage() {
        let body = r#"{"model":"m-1","choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#;
        let (text, model, usage) = parse_response(body, "m").unwrap();
        assert_eq!((text.as_str(), model.as_str()), ("hi", "m-1"));
        assert_eq!(usage, Some(Usage { prompt_tokens: 3, completion_tokens: 1 }));
        assert!(parse_response(r#"{"choices":[]}"#, "m").is_err());
    }

    #[test]
    fn body_shape() {
        let b = HttpBackend::new("http://x/v1/", Some("secret".into()), "m");
        let body = b.request_body(
            &RenderedPrompt { system_text: "s".into(), user_text: "u".into() },
            &GenerationConfig::default(),
        );
        assert_eq!(body["messages"][1]["content"], "u");
        assert_eq!(body["max_tokens"], 1024);
        assert!(!format!("{b:?}").contains("secret"));
        assert!(!b.describe().contains("secret"));
    }
}
