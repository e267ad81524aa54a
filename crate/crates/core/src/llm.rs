//! Chat-completion abstraction, the scripted mock backend, and fenced code
//! block extraction.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};

/// A system + user message pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system_text: String,
    pub user_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
    /// Samples per call.
    pub n: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { temperature: 0.7, top_p: 0.9, max_new_tokens: 1024, n: 1 }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        let ok = self.temperature >= 0.0
            && self.top_p > 0.0
            && self.top_p <= 1.0
            && self.max_new_tokens >= 1
            && self.n >= 1;
        if ok {
            Ok(())
        } else {
            Err(LlmError::InvalidConfig(alloc::format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Translator,
    Coder,
    Reviewer,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Translator => "translator",
            Stage::Coder => "coder",
            Stage::Reviewer => "reviewer",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifies one model call within a run. Remote backends ignore it; the
/// mock uses it as the lookup key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallContext<'a> {
    pub stage: Stage,
    pub task_id: &'a str,
    /// 1-based refinement attempt; translation is always attempt 1.
    pub attempt: u32,
}

impl CallContext<'_> {
    pub fn key(&self) -> String {
        alloc::format!("{}/{}/{}", self.stage, self.task_id, self.attempt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub text: String,
    pub model_id: String,
    pub latency: Duration,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("backend failure: {0}")]
    BackendFailure(String),
    #[error("mock fixture has no response for `{0}`")]
    MockExhausted(String),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("invalid mock fixture: {0}")]
    Fixture(String),
}

pub trait ChatBackend: Send + Sync {
    fn complete(
        &self,
        ctx: CallContext<'_>,
        prompt: &RenderedPrompt,
        config: &GenerationConfig,
    ) -> Result<CompletionResult, LlmError>;

    /// Descriptor recorded in run manifests.
    fn describe(&self) -> String;
}

/// Replays scripted responses keyed by `stage/task_id/attempt`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockBackend {
    responses: BTreeMap<String, String>,
}

impl MockBackend {
    pub fn new(responses: BTreeMap<String, String>) -> Self {
        Self { responses }
    }

    /// Fixture format: a JSON object from `"stage/task_id/attempt"` to text.
    pub fn from_json(json: &str) -> Result<Self, LlmError> {
        serde_json::from_str(json).map(Self::new).map_err(|e| LlmError::Fixture(e.to_string()))
    }

    pub fn insert(&mut self, stage: Stage, task_id: &str, attempt: u32, text: impl Into<String>) {
        self.responses.insert(CallContext { stage, task_id, attempt }.key(), text.into());
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatBackend for MockBackend {
    fn complete(
        &self,
        ctx: CallContext<'_>,
        _prompt: &RenderedPrompt,
        config: &GenerationConfig,
    ) -> Result<CompletionResult, LlmError> {
        config.validate()?;
        let key = ctx.key();
        let text = self.responses.get(&key).ok_or(LlmError::MockExhausted(key))?;
        Ok(CompletionResult { text: text.clone(), model_id: "mock".into(), latency: Duration::ZERO, usage: None })
    }

    fn describe(&self) -> String {
        alloc::format!("mock ({} scripted responses)", self.responses.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no complete fenced code block in the completion")]
pub struct NoCodeBlock;

fn is_fence(line: &str) -> bool {
    line.trim() == "```"
}

/// Interior of the first complete ```-fenced block, ending in exactly one
/// newline. A blank interior counts as no block.
pub fn extract_code_block(text: &str) -> Result<String, NoCodeBlock> {
    let lines: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let mut i = 0;
    while i < lines.len() {
        let opener = lines[i].trim_start();
        if let Some(tag) = opener.strip_prefix("```") {
            if tag.contains('`') {
                i += 1;
                continue;
            }
            let Some(close) = lines[i + 1..].iter().position(|l| is_fence(l)) else {
                return Err(NoCodeBlock);
            };
            let body = &lines[i + 1..i + 1 + close];
            let mut code = body.join("\n");
            let trimmed = code.trim_end_matches('\n').len();
            code.truncate(trimmed);
            if code.trim().is_empty() {
                return Err(NoCodeBlock);
            }
            code.push('\n');
            return Ok(code);
        }
        i += 1;
    }
    Err(NoCodeBlock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prompt() -> RenderedPrompt {
        RenderedPrompt { system_text: "s".into(), user_text: "u".into() }
    }

    #[test]
    fn defaults() {
        let c = GenerationConfig::default();
        assert_eq!((c.temperature, c.top_p, c.max_new_tokens, c.n), (0.7, 0.9, 1024, 1));
        assert!(c.validate().is_ok());
        assert!(GenerationConfig { top_p: 0.0, ..c }.validate().is_err());
        assert!(GenerationConfig { temperature: -0.1, ..c }.validate().is_err());
        assert!(GenerationConfig { n: 0, ..c }.validate().is_err());
    }

    #[test]
    fn mock_replays_by_key() {
        let mock = MockBackend::from_json(r#"{"coder/t1/1": "```python\nX\n```"}"#).unwrap();
        let ctx = CallContext { stage: Stage::Coder, task_id: "t1", attempt: 1 };
        let a = mock.complete(ctx, &prompt(), &GenerationConfig::default()).unwrap();
        let b = mock.complete(ctx, &prompt(), &GenerationConfig::default()).unwrap();
        assert_eq!(a.text, "```python\nX\n```");
        assert_eq!(a, b);
        let missing = CallContext { attempt: 2, ..ctx };
        assert_eq!(
            mock.complete(missing, &prompt(), &GenerationConfig::default()),
            Err(LlmError::MockExhausted("coder/t1/2".into()))
        );
    }

    #[test]
    fn extract_simple_block() {
        assert_eq!(extract_code_block("```python\nA = 1\n```").unwrap(), "A = 1\n");
    }

    #[test]
    fn extract_first_of_two() {
        let text = "Here you go:\n```python\nfirst()\n```\nand\n```\nsecond()\n```\n";
        assert_eq!(extract_code_block(text).unwrap(), "first()\n");
    }

    #[test]
    fn extract_unclosed() {
        assert_eq!(extract_code_block("```python\nA = 1\n"), Err(NoCodeBlock));
        assert_eq!(extract_code_block("no code at all"), Err(NoCodeBlock));
        assert_eq!(extract_code_block("```python\n\n```"), Err(NoCodeBlock));
    }

    #[test]
    fn extract_crlf_and_trailing_blank_lines() {
        assert_eq!(extract_code_block("```py\r\nx = 1\r\n\r\n```\r\n").unwrap(), "x = 1\n");
    }

    proptest! {
        #[test]
        fn extract_inverts_wrap(lines in proptest::collection::vec("[^`\r\n]{0,12}", 1..6)) {
            let s = lines.join("\n");
            prop_assume!(!s.trim().is_empty());
            let wrapped = alloc::format!("```python\n{s}\n```");
            let mut normalized = s.trim_end_matches('\n').to_string();
            normalized.push('\n');
            prop_assert_eq!(extract_code_block(&wrapped).unwrap(), normalized);
        }
    }
}
