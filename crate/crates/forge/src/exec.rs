//! Child-process execution of composed programs through an external runner.
//!
//! The runner is invoked as `<command...> <program_path> --cpu <s> --mem <bytes>`
//! and must print one JSON verdict line, exiting 0 on pass and 1 on fail.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use forge_core::sandbox::{
    ComposedProgram, ErrorCategory, ExecutionOutcome, Executor, RawOutcome, Verdict, VerdictStatus,
};
use wait_timeout::ChildExt;

pub const DEFAULT_MEMORY_BYTES: u64 = 512 * 1024 * 1024;
pub const PROGRAM_FILE: &str = "program.py";

#[derive(Debug, Clone)]
pub struct ProcessExecutor {
    /// Program and leading arguments, e.g. `["python3", "runner.py"]`.
    pub command: Vec<String>,
    pub memory_bytes: u64,
    /// Failed runs keep their working directory here instead of deleting it.
    pub keep_failures: Option<PathBuf>,
}

impl ProcessExecutor {
    pub fn new(command: Vec<String>) -> Self {
        assert!(!command.is_empty(), "runner command must name a program");
        Self { command, memory_bytes: DEFAULT_MEMORY_BYTES, keep_failures: None }
    }

    fn run_once(&self, program: &ComposedProgram, timeout: Duration) -> ExecutionOutcome {
        let dir = match tempfile::Builder::new().prefix("forge-exec-").tempdir() {
            Ok(d) => d,
            Err(e) => return ExecutionOutcome::harness_failure(&format!("cannot create work dir: {e}"), 0),
        };
        let path = dir.path().join(PROGRAM_FILE);
        if let Err(e) = std::fs::write(&path, &program.source) {
            return ExecutionOutcome::harness_failure(&format!("cannot write program: {e}"), 0);
        }
        let cpu_secs = timeout.as_secs_f64().ceil().max(1.0) as u64;
        let mut cmd = Command::new(&self.command[0]);
        cmd.args(&self.command[1..])
            .arg(&path)
            .arg("--cpu")
            .arg(cpu_secs.to_string())
            .arg("--mem")
            .arg(self.memory_bytes.to_string())
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);

        let started = Instant::now();
        let outcome = match cmd.spawn() {
            Ok(child) => supervise(child, timeout, started),
            Err(e) => ExecutionOutcome::harness_failure(&format!("cannot start runner `{}`: {e}", self.command[0]), 0),
        };

        if !outcome.passed {
            if let Some(keep) = &self.keep_failures {
                match persist(dir, keep) {
                    Ok(p) => tracing::info!(path = %p.display(), "kept failed work dir"),
                    Err(e) => tracing::warn!("could not keep failed work dir: {e}"),
                }
            }
        }
        outcome
    }
}

fn persist(dir: tempfile::TempDir, under: &std::path::Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(under)?;
    let src = dir.keep();
    let dest = under.join(src.file_name().expect("temp dirs have a name"));
    if std::fs::rename(&src, &dest).is_ok() {
        return Ok(dest);
    }
    // Different filesystem: copy the files across instead.
    std::fs::create_dir_all(&dest)?;
    for entry in std::fs::read_dir(&src)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            std::fs::copy(entry.path(), dest.join(entry.file_name()))?;
        }
    }
    std::fs::remove_dir_all(&src)?;
    Ok(dest)
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        buf
    })
}

fn kill_group(child: &mut Child) {
    // The runner leads its own process group, so this also reaps anything
    // the candidate spawned.
    unsafe {
        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn supervise(mut child: Child, timeout: Duration, started: Instant) -> ExecutionOutcome {
    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());
    let status = match child.wait_timeout(timeout) {
        Ok(Some(status)) => Some(status),
        Ok(None) => None,
        Err(e) => {
            kill_group(&mut child);
            return ExecutionOutcome::harness_failure(&format!("wait failed: {e}"), elapsed_ms(started));
        }
    };
    let Some(status) = status else {
        kill_group(&mut child);
        return ExecutionOutcome::from_raw(&RawOutcome::TimedOut, timeout);
    };
    // Stray grandchildren may still hold the pipes open.
    unsafe {
        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
    }
    let stdout = String::from_utf8_lossy(&stdout.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&stderr.join().unwrap_or_default()).into_owned();
    interpret(status.code(), &stdout, &stderr, elapsed_ms(started), timeout)
}

fn elapsed_ms(started: Instant) -> u64 {
    started.elapsed().as_millis() as u64
}

/// Maps the runner's exit code and output onto an outcome.
pub fn interpret(code: Option<i32>, stdout: &str, stderr: &str, elapsed_ms: u64, timeout: Duration) -> ExecutionOutcome {
    let diagnostic = || {
        let tail = stderr.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
        if tail.is_empty() { String::new() } else { format!(": {tail}") }
    };
    let lines: Vec<&str> = stdout.lines().filter(|l| !l.trim().is_empty()).collect();
    let expected = match code {
        Some(0) => VerdictStatus::Pass,
        Some(1) => VerdictStatus::Fail,
        Some(2) => return ExecutionOutcome::harness_failure(&format!("runner internal error{}", diagnostic()), elapsed_ms),
        Some(c) => return ExecutionOutcome::harness_failure(&format!("runner exited with code {c}{}", diagnostic()), elapsed_ms),
        None => return ExecutionOutcome::harness_failure(&format!("runner killed by a signal{}", diagnostic()), elapsed_ms),
    };
    let [line] = lines.as_slice() else {
        return ExecutionOutcome::harness_failure(&format!("expected one verdict line, got {}", lines.len()), elapsed_ms);
    };
    match Verdict::parse(line) {
        Ok(v) if v.status == expected => ExecutionOutcome::from_raw(&RawOutcome::Reported(v), timeout),
        Ok(_) => ExecutionOutcome::harness_failure("verdict status disagrees with exit code", elapsed_ms),
        Err(e) => ExecutionOutcome::harness_failure(&e.to_string(), elapsed_ms),
    }
}

impl Executor for ProcessExecutor {
    fn execute(&self, program: &ComposedProgram, timeout: Duration) -> ExecutionOutcome {
        let first = self.run_once(program, timeout);
        if first.category != Some(ErrorCategory::HarnessFailure) {
            return first;
        }
        tracing::warn!(message = %first.message, "runner protocol failure, retrying once");
        self.run_once(program, timeout)
    }
}
