//! File formats: task splits, example stores, glossaries, snapshots.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use forge_core::corpus::{self, CorpusError, ExampleStore, Task};
use forge_core::retriever::{RetrieverError, Vectorizer};
use forge_core::translator::{Glossary, GlossaryError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{path}: {source}")]
    Glossary { path: PathBuf, source: GlossaryError },
    #[error("{path}: {source}")]
    Snapshot { path: PathBuf, source: RetrieverError },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub fn read_text(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_owned(), source })
}

pub fn load_tasks(path: &Path, require_solutions: bool) -> Result<Vec<Task>, LoadError> {
    corpus::parse_tasks(&read_text(path)?, require_solutions)
        .map_err(|source| LoadError::Corpus { path: path.to_owned(), source })
}

pub fn load_store(path: &Path) -> Result<ExampleStore, LoadError> {
    ExampleStore::from_json(&read_text(path)?).map_err(|source| LoadError::Corpus { path: path.to_owned(), source })
}

pub fn load_glossary(path: &Path) -> Result<Glossary, LoadError> {
    Glossary::parse_tsv(&read_text(path)?).map_err(|source| LoadError::Glossary { path: path.to_owned(), source })
}

/// A JSON object from task id to English text.
pub fn load_translations(path: &Path) -> Result<BTreeMap<String, String>, LoadError> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| LoadError::Format { path: path.to_owned(), message: e.to_string() })
}

pub fn load_snapshot(path: &Path) -> Result<Vectorizer, LoadError> {
    Vectorizer::from_snapshot(&read_text(path)?).map_err(|source| LoadError::Snapshot { path: path.to_owned(), source })
}

/// Writes via a sibling temp file and rename so readers never see a partial file.
pub fn write_file(path: &Path, contents: &str) -> Result<(), LoadError> {
    let io = |source| LoadError::Io { path: path.to_owned(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
