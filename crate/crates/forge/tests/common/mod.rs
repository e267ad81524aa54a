#![allow(dead_code)]

use std::path::{Path, PathBuf};

use forge::exec::ProcessExecutor;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn stub_command() -> Vec<String> {
    vec!["python3".into(), fixture("stub_runner.py").display().to_string()]
}

pub fn stub_runner_line() -> String {
    stub_command().join(" ")
}

pub fn stub_executor() -> ProcessExecutor {
    ProcessExecutor::new(stub_command())
}

/// Stub runner with one extra environment variable, set through `env` so
/// parallel tests do not share process state.
pub fn stub_executor_with_env(key: &str, value: &Path) -> ProcessExecutor {
    let mut command = vec!["env".to_string(), format!("{key}={}", value.display())];
    command.extend(stub_command());
    ProcessExecutor::new(command)
}
