//! Solving a whole split with bounded task-level parallelism.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use forge_core::corpus::Task;
use forge_core::engine::{solve_task, transcript_jsonl, Clients, ExampleIndex, PipelineConfig, TaskResult, TranscriptRecord};
use forge_core::sandbox::Executor;
use forge_core::translator::Glossary;

use crate::io::{write_file, LoadError};

pub const TRANSCRIPT_DIR: &str = "transcripts";

/// Shared, immutable inputs for every task of a split.
#[derive(Clone, Copy)]
pub struct SplitContext<'a> {
    pub index: Option<&'a ExampleIndex>,
    pub glossary: &'a Glossary,
    pub clients: Clients<'a>,
    pub executor: &'a dyn Executor,
    pub config: &'a PipelineConfig,
}

/// File name for a task's transcript; ids are opaque so unsafe characters
/// are replaced.
pub fn transcript_file_name(task_id: &str) -> String {
    let safe: String = task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    format!("{safe}.jsonl")
}

/// Solves `tasks` with at most `parallelism` in flight. Results come back in
/// input order. With `out_dir`, each task's transcript is written to
/// `out_dir/transcripts/<id>.jsonl` and the result records that relative path.
pub fn run_split(
    tasks: &[Task],
    ctx: SplitContext<'_>,
    parallelism: usize,
    out_dir: Option<&Path>,
) -> Result<Vec<TaskResult>, LoadError> {
    assert!(parallelism >= 1, "parallelism must be at least 1");
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<TaskResult, LoadError>>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(task) = tasks.get(i) else { break };
        let out = solve_one(task, ctx, out_dir);
        *slots[i].lock().expect("slot lock") = Some(out);
    };
    std::thread::scope(|s| {
        for _ in 0..parallelism.min(tasks.len()) {
            s.spawn(worker);
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every task is solved")).collect()
}

fn solve_one(task: &Task, ctx: SplitContext<'_>, out_dir: Option<&Path>) -> Result<TaskResult, LoadError> {
    let _span = tracing::info_span!("task", id = %task.id).entered();
    let mut records: Vec<TranscriptRecord> = Vec::new();
    let mut result = solve_task(task, ctx.index, ctx.glossary, ctx.clients, ctx.executor, ctx.config, &mut records);
    if let Some(dir) = out_dir {
        let rel = format!("{TRANSCRIPT_DIR}/{}", transcript_file_name(&task.id));
        result.transcript_path = Some(rel.clone());
        // The verdict record carries the final result; keep it consistent.
        if let Some(TranscriptRecord::Verdict { result: r, .. }) = records.last_mut() {
            r.transcript_path = Some(rel.clone());
        }
        write_file(&dir.join(&rel), &transcript_jsonl(&records))?;
    }
    tracing::info!(solved = result.solved, attempts = result.attempts_used, "task finished");
    Ok(result)
}
