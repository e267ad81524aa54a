//! Benchmark records, function-signature extraction and the bilingual
//! example store used for retrieval.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scan;

/// One benchmark record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    #[serde(rename = "instruction")]
    pub instruction_bn: String,
    #[serde(rename = "response", default, skip_serializing_if = "Option::is_none")]
    pub reference_solution: Option<String>,
    #[serde(rename = "test_list")]
    pub unit_tests: Vec<String>,
}

/// Name of the function under test plus the call text from the first test
/// that mentions it, e.g. `add` / `add(1,2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSignature {
    pub name: String,
    pub call_form: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilingualExample {
    pub id: String,
    pub prompt_bn: String,
    pub prompt_en: String,
    pub solution_code: String,
    pub tests: Vec<String>,
}

/// Ordered, id-unique collection of solved examples. Insertion order is the
/// tie-break order used by retrieval.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExampleStore {
    examples: Vec<BilingualExample>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed record at index {index}: {reason}")]
    MalformedRecord { index: usize, reason: String },
    #[error("task file is not a JSON array: {0}")]
    NotAnArray(String),
    #[error("no `identifier(` call found in any unit test")]
    NoCallFound,
    #[error("tasks without a reference solution: {}", .0.join(", "))]
    MissingSolution(Vec<String>),
    #[error("duplicate example id `{0}`")]
    DuplicateExample(String),
}

fn malformed(index: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedRecord { index, reason: reason.into() }
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str, index: usize) -> Result<Option<String>, CorpusError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(malformed(index, alloc::format!("`{key}` must be a string"))),
    }
}

fn parse_record(index: usize, value: &Value, require_solution: bool) -> Result<(Task, Option<String>), CorpusError> {
    let obj = value.as_object().ok_or_else(|| malformed(index, "record is not an object"))?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        // numeric ids are kept as their textual form
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err(malformed(index, "`id` must be a string or number")),
        None => return Err(malformed(index, "missing key `id`")),
    };
    if id.is_empty() {
        return Err(malformed(index, "`id` is empty"));
    }
    let instruction_bn =
        string_field(obj, "instruction", index)?.ok_or_else(|| malformed(index, "missing key `instruction`"))?;
    let reference_solution = string_field(obj, "response", index)?;
    if require_solution && reference_solution.is_none() {
        return Err(malformed(index, "missing key `response`"));
    }
    let tests = match obj.get("test_list") {
        Some(Value::Array(items)) => items,
        Some(_) => return Err(malformed(index, "`test_list` must be an array")),
        None => return Err(malformed(index, "missing key `test_list`")),
    };
    if tests.is_empty() {
        return Err(malformed(index, "`test_list` is empty"));
    }
    let mut unit_tests = Vec::with_capacity(tests.len());
    for (j, t) in tests.iter().enumerate() {
        let t = t
            .as_str()
            .ok_or_else(|| malformed(index, alloc::format!("`test_list[{j}]` must be a string")))?;
        if !is_assert(t) {
            return Err(malformed(index, alloc::format!("`test_list[{j}]` is not an assert statement")));
        }
        unit_tests.push(t.to_string());
    }
    let instruction_en = string_field(obj, "instruction_en", index)?;
    Ok((Task { id, instruction_bn, reference_solution, unit_tests }, instruction_en))
}

fn is_assert(test: &str) -> bool {
    let t = test.trim_start();
    t.strip_prefix("assert")
        .is_some_and(|rest| rest.chars().next().is_none_or(|c| !(c == '_' || c.is_alphanumeric())))
}

/// Parses a task file body: a JSON array of `{id, instruction, response?, test_list}`.
pub fn parse_tasks(json: &str, require_solutions: bool) -> Result<Vec<Task>, CorpusError> {
    Ok(parse_records(json, require_solutions)?.into_iter().map(|(t, _)| t).collect())
}

/// Like [`parse_tasks`] but also returns the optional `instruction_en` of
/// each record (the store snapshot schema).
pub fn parse_records(json: &str, require_solutions: bool) -> Result<Vec<(Task, Option<String>)>, CorpusError> {
    let value: Value = serde_json::from_str(json).map_err(|e| CorpusError::NotAnArray(e.to_string()))?;
    let Value::Array(items) = value else {
        return Err(CorpusError::NotAnArray("top-level value is not an array".into()));
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let record = parse_record(index, item, require_solutions)?;
        if !seen.insert(record.0.id.clone()) {
            return Err(malformed(index, alloc::format!("duplicate id `{}`", record.0.id)));
        }
        out.push(record);
    }
    Ok(out)
}

/// Serializes tasks back into the task file schema.
pub fn serialize_tasks(tasks: &[Task]) -> String {
    serde_json::to_string_pretty(tasks).expect("tasks always serialize")
}

// Builtins that commonly wrap the call under test, e.g. `set(f(x)) == ...`.
const WRAPPERS: &[&str] = &[
    "abs", "all", "any", "bool", "dict", "enumerate", "filter", "float", "frozenset", "int", "isinstance", "len",
    "list", "map", "max", "min", "print", "range", "repr", "reversed", "round", "set", "sorted", "str", "sum",
    "tuple", "type", "zip",
];

const KEYWORDS: &[&str] = &["and", "assert", "if", "else", "in", "is", "lambda", "not", "or"];

fn assert_body(test: &str) -> &str {
    let t = test.trim_start();
    t.strip_prefix("assert").unwrap_or(t)
}

fn call_at(body: &str, site: scan::CallSite) -> FunctionSignature {
    let name = &body[site.name_start..site.open];
    let end = scan::matching_close(body, site.open).map(|c| c + 1).unwrap_or(body.len());
    FunctionSignature { name: name.to_string(), call_form: body[site.name_start..end].to_string() }
}

/// Extracts the function under test from the task's unit tests.
///
/// The first plain (non-attribute, non-keyword) call in the first test wins;
/// builtin wrappers such as `set(...)` or `sorted(...)` are skipped when a
/// non-wrapper call exists. Later tests are consulted only if earlier ones
/// have no candidate.
pub fn parse_signature(task: &Task) -> Result<FunctionSignature, CorpusError> {
    signature_from_tests(&task.unit_tests)
}

/// [`parse_signature`] over a bare list of assert statements.
pub fn signature_from_tests(tests: &[String]) -> Result<FunctionSignature, CorpusError> {
    let mut fallback = None;
    for test in tests {
        let body = assert_body(test);
        for site in scan::call_sites(body) {
            let name = &body[site.name_start..site.open];
            if site.dotted || KEYWORDS.contains(&name) {
                continue;
            }
            if WRAPPERS.contains(&name) {
                fallback.get_or_insert_with(|| call_at(body, site));
                continue;
            }
            return Ok(call_at(body, site));
        }
    }
    fallback.ok_or(CorpusError::NoCallFound)
}

impl ExampleStore {
    pub fn new(examples: Vec<BilingualExample>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(CorpusError::DuplicateExample(ex.id.clone()));
            }
        }
        Ok(Self { examples })
    }

    pub fn examples(&self) -> &[BilingualExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.examples.iter().position(|e| e.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&BilingualExample> {
        self.position(id).map(|i| &self.examples[i])
    }

    /// Snapshot in the task-file schema plus `instruction_en`.
    pub fn to_json(&self) -> String {
        let records: Vec<Value> = self
            .examples
            .iter()
            .map(|e| {
                serde_json::json!({
                    "id": e.id,
                    "instruction": e.prompt_bn,
                    "instruction_en": e.prompt_en,
                    "response": e.solution_code,
                    "test_list": e.tests,
                })
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("store always serializes")
    }

    /// Reads a snapshot written by [`ExampleStore::to_json`] (or a plain task
    /// file with `response` on every record).
    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let records = parse_records(json, true)?;
        let mut translations = BTreeMap::new();
        let mut tasks = Vec::with_capacity(records.len());
        for (task, en) in records {
            if let Some(en) = en {
                translations.insert(task.id.clone(), en);
            }
            tasks.push(task);
        }
        build_store(&tasks, Some(&translations))
    }
}

/// One example per task, in task order. `prompt_en` comes from
/// `translations` when present, otherwise it is left empty.
pub fn build_store(tasks: &[Task], translations: Option<&BTreeMap<String, String>>) -> Result<ExampleStore, CorpusError> {
    let missing: Vec<String> =
        tasks.iter().filter(|t| t.reference_solution.is_none()).map(|t| t.id.clone()).collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingSolution(missing));
    }
    let examples = tasks
        .iter()
        .map(|t| BilingualExample {
            id: t.id.clone(),
            prompt_bn: t.instruction_bn.clone(),
            prompt_en: translations.and_then(|m| m.get(&t.id)).cloned().unwrap_or_default(),
            solution_code: t.reference_solution.clone().unwrap_or_default(),
            tests: t.unit_tests.clone(),
        })
        .collect();
    ExampleStore::new(examples)
}
