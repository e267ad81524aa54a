//! Per-task orchestration: translate once, retrieve once, then up to `M`
//! coder → reviewer → execute rounds, feeding the latest failure back into
//! the next coder prompt.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{parse_signature, BilingualExample, ExampleStore, Task};
use crate::llm::{extract_code_block, CallContext, ChatBackend, GenerationConfig, LlmError, RenderedPrompt, Stage};
use crate::prompts::{render_coder_prompt, render_reviewer_prompt, FeedbackBlock};
use crate::retriever::{RetrieverError, Vectorizer};
use crate::sandbox::{compose, ErrorCategory, ExecutionOutcome, Executor, Origin};
use crate::translator::{parse_translation, render_translation_prompt, Glossary, TranslateError, TranslatedInstruction};

pub const NO_CODE_BLOCK_MESSAGE: &str = "No fenced Python code block found in the response.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExamplesMode {
    Rag,
    Manual,
    None,
}

impl ExamplesMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExamplesMode::Rag => "rag",
            ExamplesMode::Manual => "manual",
            ExamplesMode::None => "none",
        }
    }
}

impl fmt::Display for ExamplesMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Number of retrieved examples.
    pub k: usize,
    /// Maximum refinement iterations `M`.
    pub max_iterations: u32,
    pub timeout_secs: u64,
    pub use_translation: bool,
    pub use_glossary: bool,
    pub use_reviewer: bool,
    pub use_feedback: bool,
    pub examples_mode: ExamplesMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_example_ids: Option<Vec<String>>,
    pub translator: GenerationConfig,
    pub coder: GenerationConfig,
    pub reviewer: GenerationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 5,
            max_iterations: 5,
            timeout_secs: 10,
            use_translation: true,
            use_glossary: true,
            use_reviewer: true,
            use_feedback: true,
            examples_mode: ExamplesMode::Rag,
            manual_example_ids: None,
            translator: GenerationConfig::default(),
            coder: GenerationConfig::default(),
            reviewer: GenerationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
    #[error("timeout must be positive")]
    ZeroTimeout,
    #[error("manual_example_ids is required exactly when examples_mode is manual")]
    ManualIds,
    #[error("manual example `{0}` is not in the store")]
    UnknownManualExample(String),
    #[error("examples mode `{0}` needs an example store")]
    MissingStore(ExamplesMode),
    #[error(transparent)]
    Generation(#[from] LlmError),
}

impl PipelineConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn validate(&self, index: Option<&ExampleIndex>) -> Result<(), ConfigError> {
        if self.max_iterations == 0 {
            return Err(ConfigError::ZeroIterations);
        }
        if self.timeout_secs == 0 {
            return Err(ConfigError::ZeroTimeout);
        }
        for g in [&self.translator, &self.coder, &self.reviewer] {
            g.validate()?;
        }
        match (self.examples_mode, &self.manual_example_ids) {
            (ExamplesMode::Manual, Some(ids)) => {
                let index = index.ok_or(ConfigError::MissingStore(ExamplesMode::Manual))?;
                if let Some(missing) = ids.iter().find(|id| index.store.get(id).is_none()) {
                    return Err(ConfigError::UnknownManualExample(missing.clone()));
                }
            }
            (ExamplesMode::Manual, None) | (_, Some(_)) => return Err(ConfigError::ManualIds),
            (ExamplesMode::Rag, None) => {
                if self.k > 0 && index.is_none() {
                    return Err(ConfigError::MissingStore(ExamplesMode::Rag));
                }
            }
            (ExamplesMode::None, None) => {}
        }
        Ok(())
    }

    /// Short stable label of the ablation-relevant settings.
    pub fn fingerprint(&self) -> String {
        let b = |x: bool| if x { 1 } else { 0 };
        alloc::format!(
            "tr{}-gl{}-rv{}-fb{}-{}-k{}-M{}",
            b(self.use_translation),
            b(self.use_glossary),
            b(self.use_reviewer),
            b(self.use_feedback),
            self.examples_mode,
            self.k,
            self.max_iterations
        )
    }
}

/// A store together with its fitted vectorizer.
#[derive(Debug, Clone)]
pub struct ExampleIndex {
    pub store: ExampleStore,
    pub vectorizer: Vectorizer,
}

impl ExampleIndex {
    pub fn build(store: ExampleStore) -> Result<Self, RetrieverError> {
        let vectorizer = Vectorizer::fit(&store)?;
        Ok(Self { store, vectorizer })
    }
}

#[derive(Clone, Copy)]
pub struct Clients<'a> {
    pub translator: &'a dyn ChatBackend,
    pub coder: &'a dyn ChatBackend,
    pub reviewer: &'a dyn ChatBackend,
}

impl<'a> Clients<'a> {
    pub fn shared(backend: &'a dyn ChatBackend) -> Self {
        Self { translator: backend, coder: backend, reviewer: backend }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSolution {
    pub code: String,
    pub origin: Origin,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub solved: bool,
    pub attempts_used: u32,
    /// The passing program when solved, otherwise the last executed candidate.
    pub final_code: Option<String>,
    pub failure_category: Option<ErrorCategory>,
    /// Set when the task stopped for a reason other than exhausting `M`
    /// ordinary failures (backend failure, harness failure, no code at all).
    pub terminal_error: Option<String>,
    pub transcript_path: Option<String>,
}

impl TaskResult {
    pub fn first_attempt_solved(&self) -> bool {
        self.solved && self.attempts_used == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExample {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// The execution outcome as recorded in transcripts (no timing, so mock
/// runs stay byte-stable).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedOutcome {
    pub passed: bool,
    pub category: Option<ErrorCategory>,
    pub message: String,
    pub test_tag: Option<u32>,
}

impl From<&ExecutionOutcome> for RecordedOutcome {
    fn from(o: &ExecutionOutcome) -> Self {
        Self { passed: o.passed, category: o.category, message: o.message.clone(), test_tag: o.test_tag }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptRecord {
    TranslateRequest { task_id: String, prompt: RenderedPrompt },
    TranslateResponse { task_id: String, model_id: String, text: String },
    Retrieval { task_id: String, mode: ExamplesMode, examples: Vec<RetrievedExample> },
    CoderRequest { task_id: String, attempt: u32, prompt: RenderedPrompt },
    CoderResponse { task_id: String, attempt: u32, model_id: String, text: String },
    ReviewerRequest { task_id: String, attempt: u32, prompt: RenderedPrompt },
    ReviewerResponse { task_id: String, attempt: u32, model_id: String, text: String },
    Execution { task_id: String, attempt: u32, origin: Origin, outcome: RecordedOutcome },
    Note { task_id: String, attempt: u32, message: String },
    Verdict { task_id: String, result: TaskResult },
}

impl TranscriptRecord {
    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("transcript records always serialize");
        s.push('\n');
        s
    }
}

pub trait TranscriptSink {
    fn record(&mut self, record: TranscriptRecord);
}

impl TranscriptSink for Vec<TranscriptRecord> {
    fn record(&mut self, record: TranscriptRecord) {
        self.push(record);
    }
}

/// Renders records as JSON lines.
pub fn transcript_jsonl(records: &[TranscriptRecord]) -> String {
    records.iter().map(TranscriptRecord::to_json_line).collect()
}

struct Run<'a, S: TranscriptSink + ?Sized> {
    task: &'a Task,
    sink: &'a mut S,
}

impl<S: TranscriptSink + ?Sized> Run<'_, S> {
    fn id(&self) -> String {
        self.task.id.clone()
    }

    fn note(&mut self, attempt: u32, message: impl Into<String>) {
        let task_id = self.id();
        self.sink.record(TranscriptRecord::Note { task_id, attempt, message: message.into() });
    }

    fn finish(&mut self, result: TaskResult) -> TaskResult {
        let task_id = self.id();
        self.sink.record(TranscriptRecord::Verdict { task_id, result: result.clone() });
        result
    }

    fn terminal(&mut self, attempts_used: u32, final_code: Option<String>, category: Option<ErrorCategory>, err: impl fmt::Display) -> TaskResult {
        let result = TaskResult {
            task_id: self.id(),
            solved: false,
            attempts_used,
            final_code,
            failure_category: category,
            terminal_error: Some(err.to_string()),
            transcript_path: None,
        };
        self.finish(result)
    }
}

fn select_examples<'i>(
    task: &Task,
    translation: &TranslatedInstruction,
    index: Option<&'i ExampleIndex>,
    config: &PipelineConfig,
) -> Result<(Vec<&'i BilingualExample>, Vec<RetrievedExample>), RetrieverError> {
    let Some(index) = index else {
        return Ok((Vec::new(), Vec::new()));
    };
    match config.examples_mode {
        ExamplesMode::None => Ok((Vec::new(), Vec::new())),
        ExamplesMode::Rag => {
            let hits = index.vectorizer.top_k(
                &index.store,
                &task.instruction_bn,
                &translation.text_en,
                config.k,
                Some(&task.id),
            )?;
            let log = hits.iter().map(|h| RetrievedExample { id: h.example.id.clone(), score: Some(h.score) }).collect();
            Ok((hits.iter().map(|h| h.example).collect(), log))
        }
        ExamplesMode::Manual => {
            let picked: Vec<&BilingualExample> = config
                .manual_example_ids
                .iter()
                .flatten()
                .filter(|id| **id != task.id)
                .filter_map(|id| index.store.get(id))
                .collect();
            let log = picked.iter().map(|e| RetrievedExample { id: e.id.clone(), score: None }).collect();
            Ok((picked, log))
        }
    }
}

/// Solves one task. Never fails: backend and harness problems end the task
/// and are reported in the returned [`TaskResult`].
pub fn solve_task<S: TranscriptSink + ?Sized>(
    task: &Task,
    index: Option<&ExampleIndex>,
    glossary: &Glossary,
    clients: Clients<'_>,
    executor: &dyn Executor,
    config: &PipelineConfig,
    sink: &mut S,
) -> TaskResult {
    let mut run = Run { task, sink };
    let task_id = task.id.as_str();

    let sig = match parse_signature(task) {
        Ok(sig) => sig,
        Err(e) => return run.terminal(0, None, None, e),
    };

    let translation = if config.use_translation {
        let empty = Glossary::default();
        let glossary = if config.use_glossary { glossary } else { &empty };
        let prompt = render_translation_prompt(&task.instruction_bn, &task.unit_tests[0], glossary);
        run.sink.record(TranscriptRecord::TranslateRequest { task_id: run.id(), prompt: prompt.clone() });
        let ctx = CallContext { stage: Stage::Translator, task_id, attempt: 1 };
        let completion = match clients.translator.complete(ctx, &prompt, &config.translator) {
            Ok(c) => c,
            Err(e) => return run.terminal(0, None, None, TranslateError::from(e)),
        };
        run.sink.record(TranscriptRecord::TranslateResponse {
            task_id: run.id(),
            model_id: completion.model_id.clone(),
            text: completion.text.clone(),
        });
        match parse_translation(&sig, &completion.text) {
            Ok(t) => t,
            Err(e) => return run.terminal(0, None, None, e),
        }
    } else {
        TranslatedInstruction::untranslated(&sig)
    };

    let (examples, retrieved) = match select_examples(task, &translation, index, config) {
        Ok(x) => x,
        Err(e) => return run.terminal(0, None, None, e),
    };
    run.sink.record(TranscriptRecord::Retrieval { task_id: run.id(), mode: config.examples_mode, examples: retrieved });

    let max = config.max_iterations.max(1);
    let mut feedback: Option<FeedbackBlock> = None;
    let mut last_code: Option<String> = None;
    let mut last_category = None;
    let mut attempts_with_code = 0u32;

    for attempt in 1..=max {
        let fb = if config.use_feedback { feedback.as_ref() } else { None };
        let prompt = render_coder_prompt(task, &translation, &examples, fb);
        run.sink.record(TranscriptRecord::CoderRequest { task_id: run.id(), attempt, prompt: prompt.clone() });
        let ctx = CallContext { stage: Stage::Coder, task_id, attempt };
        let response = match clients.coder.complete(ctx, &prompt, &config.coder) {
            Ok(c) => c,
            Err(e) => return run.terminal(attempt, last_code, last_category, e),
        };
        run.sink.record(TranscriptRecord::CoderResponse {
            task_id: run.id(),
            attempt,
            model_id: response.model_id.clone(),
            text: response.text.clone(),
        });

        let code = match extract_code_block(&response.text) {
            Ok(code) => code,
            Err(_) => {
                run.note(attempt, "coder response has no code block");
                let outcome = ExecutionOutcome::fail(ErrorCategory::SyntaxError, NO_CODE_BLOCK_MESSAGE, None, 0);
                feedback = FeedbackBlock::from_outcome(&response.text, &outcome).and_then(Result::ok);
                last_category = outcome.category;
                continue;
            }
        };
        attempts_with_code += 1;

        let (candidate, raw_response) = if config.use_reviewer {
            let rprompt = render_reviewer_prompt(task, &translation, &code);
            run.sink.record(TranscriptRecord::ReviewerRequest { task_id: run.id(), attempt, prompt: rprompt.clone() });
            let ctx = CallContext { stage: Stage::Reviewer, task_id, attempt };
            let reviewed = match clients.reviewer.complete(ctx, &rprompt, &config.reviewer) {
                Ok(c) => c,
                Err(e) => return run.terminal(attempt, Some(code), last_category, e),
            };
            run.sink.record(TranscriptRecord::ReviewerResponse {
                task_id: run.id(),
                attempt,
                model_id: reviewed.model_id.clone(),
                text: reviewed.text.clone(),
            });
            match extract_code_block(&reviewed.text) {
                Ok(rc) => (CandidateSolution { code: rc, origin: Origin::Reviewer, attempt }, reviewed.text),
                Err(_) => {
                    run.note(attempt, "reviewer response has no code block; executing the coder candidate");
                    (CandidateSolution { code, origin: Origin::Coder, attempt }, response.text)
                }
            }
        } else {
            (CandidateSolution { code, origin: Origin::Coder, attempt }, response.text)
        };

        let program = compose(&candidate.code, &task.unit_tests, candidate.origin);
        let outcome = executor.execute(&program, config.timeout());
        run.sink.record(TranscriptRecord::Execution {
            task_id: run.id(),
            attempt,
            origin: candidate.origin,
            outcome: RecordedOutcome::from(&outcome),
        });

        if outcome.passed {
            let result = TaskResult {
                task_id: run.id(),
                solved: true,
                attempts_used: attempt,
                final_code: Some(candidate.code),
                failure_category: None,
                terminal_error: None,
                transcript_path: None,
            };
            return run.finish(result);
        }
        last_category = outcome.category;
        last_code = Some(candidate.code);
        match FeedbackBlock::from_outcome(&raw_response, &outcome) {
            Some(Ok(fb)) => feedback = Some(fb),
            // only HarnessFailure lacks a hint: the runner, not the candidate, is broken
            _ => return run.terminal(attempt, last_code, last_category, outcome.describe()),
        }
    }

    if attempts_with_code == 0 {
        return run.terminal(max, None, last_category, "no code block in any attempt");
    }
    let result = TaskResult {
        task_id: run.id(),
        solved: false,
        attempts_used: max,
        final_code: last_code,
        failure_category: last_category,
        terminal_error: None,
        transcript_path: None,
    };
    run.finish(result)
}
