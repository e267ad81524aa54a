//! Program composition, the runner verdict protocol, and the error taxonomy
//! with its fix hints. Actually running programs is left to an [`Executor`].

use alloc::string::{String, ToString};
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};

pub const CHECK_HELPER: &str = "def check(test_id, test_val, expected):\n    assert test_val == expected, f\"Test {test_id}: Expected {expected}, got {test_val}\"\n";

/// Name of the global the harness bumps before each public assert.
pub const TEST_TAG_VAR: &str = "_forge_test_tag";

pub const MESSAGE_LIMIT: usize = 2000;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Extra time allowed past the timeout before an execution must have returned.
pub const KILL_GRACE: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Coder,
    Reviewer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedProgram {
    pub source: String,
    pub public_test_count: usize,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorCategory {
    SyntaxError,
    RuntimeError,
    AssertionFailure,
    TimeoutError,
    SystemExit,
    /// Runner protocol violation; never caused by the candidate itself.
    HarnessFailure,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::SyntaxError,
        ErrorCategory::RuntimeError,
        ErrorCategory::AssertionFailure,
        ErrorCategory::TimeoutError,
        ErrorCategory::SystemExit,
        ErrorCategory::HarnessFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::SyntaxError => "SyntaxError",
            ErrorCategory::RuntimeError => "RuntimeError",
            ErrorCategory::AssertionFailure => "AssertionFailure",
            ErrorCategory::TimeoutError => "TimeoutError",
            ErrorCategory::SystemExit => "SystemExit",
            ErrorCategory::HarnessFailure => "HarnessFailure",
        }
    }

    /// Human label used in feedback prompts.
    pub fn label(self) -> &'static str {
        match self {
            ErrorCategory::SyntaxError => "Syntax Error",
            ErrorCategory::RuntimeError => "Runtime Error",
            ErrorCategory::AssertionFailure => "Assertion Failure",
            ErrorCategory::TimeoutError => "Timeout Error",
            ErrorCategory::SystemExit => "System Exit",
            ErrorCategory::HarnessFailure => "Harness Failure",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no fix hint exists for {0}")]
pub struct NoHint(pub ErrorCategory);

/// Fix hint fed back to the coder for a failure category.
pub fn hint(category: ErrorCategory) -> Result<&'static str, NoHint> {
    Ok(match category {
        ErrorCategory::SyntaxError => {
            "Check indentation, missing colons, or parentheses; ensure valid Python syntax."
        }
        ErrorCategory::RuntimeError => {
            "Ensure variables are initialized and referenced correctly; verify data types and control flow."
        }
        ErrorCategory::AssertionFailure => {
            "Compare expected vs. actual outputs; review logical steps and boundary conditions."
        }
        ErrorCategory::TimeoutError => "Optimize loops or recursion; include clear termination conditions.",
        ErrorCategory::SystemExit => "Avoid abrupt exits; allow the program to complete execution normally.",
        ErrorCategory::HarnessFailure => return Err(NoHint(category)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Compile,
    Assertion,
    SystemExit,
    Exception,
}

/// The runner's single-line JSON report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub status: VerdictStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<VerdictKind>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_tag: Option<u32>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("runner protocol violation: {0}")]
pub struct ProtocolError(pub String);

impl Verdict {
    pub fn parse(line: &str) -> Result<Self, ProtocolError> {
        let v: Verdict = serde_json::from_str(line.trim()).map_err(|e| ProtocolError(e.to_string()))?;
        match (v.status, v.kind) {
            (VerdictStatus::Pass, None) | (VerdictStatus::Fail, Some(_)) => Ok(v),
            (VerdictStatus::Pass, Some(_)) => Err(ProtocolError("pass verdict carries a kind".into())),
            (VerdictStatus::Fail, None) => Err(ProtocolError("fail verdict without a kind".into())),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("verdict always serializes")
    }
}

/// What the orchestrator observed for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawOutcome {
    Reported(Verdict),
    /// Killed by the orchestrator at the wall-clock limit.
    TimedOut,
}

/// Failure category of a raw outcome; `None` for a passing verdict.
pub fn classify(raw: &RawOutcome) -> Option<ErrorCategory> {
    match raw {
        RawOutcome::TimedOut => Some(ErrorCategory::TimeoutError),
        RawOutcome::Reported(v) => v.kind.map(|k| match k {
            VerdictKind::Compile => ErrorCategory::SyntaxError,
            VerdictKind::Assertion => ErrorCategory::AssertionFailure,
            VerdictKind::SystemExit => ErrorCategory::SystemExit,
            VerdictKind::Exception => ErrorCategory::RuntimeError,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub passed: bool,
    pub category: Option<ErrorCategory>,
    pub message: String,
    /// 0 = the program's own `main()`, n = n-th public test.
    pub test_tag: Option<u32>,
    pub duration_ms: u64,
}

pub fn truncate_message(message: &str) -> String {
    match message.char_indices().nth(MESSAGE_LIMIT) {
        Some((cut, _)) => message[..cut].to_string(),
        None => message.to_string(),
    }
}

impl ExecutionOutcome {
    pub fn pass(duration_ms: u64) -> Self {
        Self { passed: true, category: None, message: String::new(), test_tag: None, duration_ms }
    }

    pub fn fail(category: ErrorCategory, message: &str, test_tag: Option<u32>, duration_ms: u64) -> Self {
        Self { passed: false, category: Some(category), message: truncate_message(message), test_tag, duration_ms }
    }

    pub fn from_raw(raw: &RawOutcome, timeout: Duration) -> Self {
        match (raw, classify(raw)) {
            (RawOutcome::TimedOut, _) => Self::fail(
                ErrorCategory::TimeoutError,
                &alloc::format!("Execution timed out after {} ms", timeout.as_millis()),
                None,
                timeout.as_millis() as u64,
            ),
            (RawOutcome::Reported(v), None) => Self::pass(v.duration_ms),
            (RawOutcome::Reported(v), Some(cat)) => Self::fail(cat, &v.message, v.test_tag, v.duration_ms),
        }
    }

    pub fn harness_failure(message: &str, duration_ms: u64) -> Self {
        Self::fail(ErrorCategory::HarnessFailure, message, None, duration_ms)
    }

    /// Error line shown to the coder in the feedback block.
    pub fn describe(&self) -> String {
        let Some(cat) = self.category else {
            return String::from("passed");
        };
        match self.test_tag {
            Some(0) => alloc::format!("{}: {} (in main)", cat.label(), self.message),
            Some(n) => alloc::format!("{}: {} (public test {n})", cat.label(), self.message),
            None => alloc::format!("{}: {}", cat.label(), self.message),
        }
    }
}

/// Runs composed programs. Implementations must return within
/// `timeout + KILL_GRACE` and report protocol trouble as
/// [`ErrorCategory::HarnessFailure`] rather than panicking.
pub trait Executor: Send + Sync {
    fn execute(&self, program: &ComposedProgram, timeout: Duration) -> ExecutionOutcome;
}

fn defines_top_level(source: &str, prefix: &str) -> bool {
    source.lines().any(|l| l.starts_with(prefix))
}

pub fn count_check_definitions(source: &str) -> usize {
    source.lines().filter(|l| l.starts_with("def check(")).count()
}

/// Candidate + (check helper if missing) + harness that calls `main()` when
/// defined and then runs every public test as a bare assert, fail-fast.
pub fn compose(candidate: &str, public_tests: &[String], origin: Origin) -> ComposedProgram {
    let mut source = String::with_capacity(candidate.len() + 256);
    source.push_str(candidate);
    if !source.ends_with('\n') {
        source.push('\n');
    }
    if !defines_top_level(candidate, "def check(") {
        source.push('\n');
        source.push_str(CHECK_HELPER);
    }
    source.push_str("\n# forge harness\n");
    if defines_top_level(candidate, "def main(") {
        source.push_str(TEST_TAG_VAR);
        source.push_str(" = 0\nmain()\n");
    }
    for (i, test) in public_tests.iter().enumerate() {
        source.push_str(&alloc::format!("{TEST_TAG_VAR} = {}\n", i + 1));
        source.push_str(test.trim());
        source.push('\n');
    }
    ComposedProgram { source, public_test_count: public_tests.len(), origin }
}
