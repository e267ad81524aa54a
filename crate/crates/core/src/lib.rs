//! Core of the forge pipeline: turns a natural-language programming task
//! (Bangla instruction plus assert-based unit tests) into a candidate Python
//! solution through translation, TF-IDF exemplar retrieval, coder/reviewer
//! prompting, execution and bounded refinement.
//!
//! This crate is `no_std` (with `alloc`). Everything that touches the file
//! system, the network or child processes lives in the `forge` crate, which
//! plugs into the traits defined here ([`llm::ChatBackend`],
//! [`sandbox::Executor`], [`engine::TranscriptSink`]).

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod engine;
pub mod eval;
pub mod llm;
pub mod prompts;
pub mod retriever;
pub mod sandbox;
mod scan;
pub mod translator;

pub use corpus::{BilingualExample, ExampleStore, FunctionSignature, Task};
pub use engine::{solve_task, CandidateSolution, Clients, ExamplesMode, PipelineConfig, TaskResult};
pub use eval::{pass_at_1, EvalReport};
pub use llm::{ChatBackend, CompletionResult, GenerationConfig, MockBackend, RenderedPrompt, Stage};
pub use retriever::{RetrievalHit, Vectorizer};
pub use sandbox::{ComposedProgram, ErrorCategory, ExecutionOutcome, Executor, Origin};
pub use translator::{Glossary, TranslatedInstruction};
