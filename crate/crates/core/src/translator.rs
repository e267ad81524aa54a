//! Glossary-controlled translation of the Bangla instruction and
//! normalization of the function prototype.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{parse_signature, CorpusError, FunctionSignature, Task};
use crate::llm::{CallContext, ChatBackend, GenerationConfig, LlmError, RenderedPrompt, Stage};
use crate::prompts::{self, substitute};
use crate::scan;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Glossary {
    entries: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GlossaryError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: &'static str },
    #[error("line {line}: duplicate term `{term}`")]
    DuplicateTerm { line: usize, term: String },
}

impl Glossary {
    pub fn new(entries: Vec<(String, String)>) -> Result<Self, GlossaryError> {
        let mut seen = BTreeSet::new();
        for (i, (bn, en)) in entries.iter().enumerate() {
            if bn.is_empty() || en.is_empty() {
                return Err(GlossaryError::MalformedLine { line: i + 1, reason: "empty term" });
            }
            if !seen.insert(bn.as_str()) {
                return Err(GlossaryError::DuplicateTerm { line: i + 1, term: bn.clone() });
            }
        }
        Ok(Self { entries })
    }

    /// Two tab-separated columns (Bangla, English) per line. Lines starting
    /// with `#` and blank lines are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self, GlossaryError> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.strip_suffix('\r').unwrap_or(raw);
            if l.trim().is_empty() || l.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = l.split('\t');
            let (Some(bn), Some(en), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(GlossaryError::MalformedLine { line, reason: "expected exactly two tab-separated columns" });
            };
            let (bn, en) = (bn.trim(), en.trim());
            if bn.is_empty() || en.is_empty() {
                return Err(GlossaryError::MalformedLine { line, reason: "empty term" });
            }
            if !seen.insert(bn.to_string()) {
                return Err(GlossaryError::DuplicateTerm { line, term: bn.to_string() });
            }
            entries.push((bn.to_string(), en.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `bn -> en; bn -> en`, or the literal `{}` when empty.
    pub fn render(&self) -> String {
        if self.entries.is_empty() {
            return "{}".into();
        }
        let parts: Vec<String> = self.entries.iter().map(|(bn, en)| alloc::format!("{bn} -> {en}")).collect();
        parts.join("; ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslatedInstruction {
    pub text_en: String,
    /// e.g. `def add(a: int, b: int) -> int` (no trailing colon).
    pub normalized_prototype: String,
}

impl TranslatedInstruction {
    /// Used when translation is disabled: no English text and an untyped
    /// prototype derived from the test call.
    pub fn untranslated(sig: &FunctionSignature) -> Self {
        Self { text_en: String::new(), normalized_prototype: synthesize_prototype(&sig.call_form) }
    }

    /// Prototype without the leading `def `.
    pub fn function_call(&self) -> &str {
        self.normalized_prototype.strip_prefix("def ").unwrap_or(&self.normalized_prototype)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error("translator returned an empty completion")]
    EmptyCompletion,
    #[error(transparent)]
    Signature(#[from] CorpusError),
}

pub fn render_translation_prompt(instruction_bn: &str, unit_test: &str, glossary: &Glossary) -> RenderedPrompt {
    let glossary = glossary.render();
    RenderedPrompt {
        system_text: substitute(prompts::TRANSLATOR_SYSTEM, &[("glossary", &glossary), ("test", unit_test)]),
        user_text: instruction_bn.to_string(),
    }
}

/// `def name(arg1, arg2)` from a call such as `name(1, [2])`; keyword
/// arguments keep their names.
pub fn synthesize_prototype(call_form: &str) -> String {
    let Some(open) = call_form.find('(') else {
        return alloc::format!("def {call_form}()");
    };
    let name = &call_form[..open];
    let inner_end = scan::matching_close(call_form, open).unwrap_or(call_form.len());
    let inner = &call_form[open + 1..inner_end];
    let mut params = Vec::new();
    for (i, arg) in scan::split_top_level(inner, b',').into_iter().enumerate() {
        let arg = arg.trim();
        if arg.is_empty() {
            continue;
        }
        let kw = arg
            .split_once('=')
            .filter(|(k, v)| !v.starts_with('=') && scan::is_identifier(k.trim()))
            .map(|(k, _)| k.trim().to_string());
        params.push(kw.unwrap_or_else(|| alloc::format!("arg{}", i + 1)));
    }
    alloc::format!("def {name}({})", params.join(", "))
}

/// First `def <name>(...)` prototype found on a single line of `text`,
/// including a `-> T` annotation when present, without the trailing colon.
pub fn extract_prototype(text: &str, name: &str) -> Option<String> {
    let needle = alloc::format!("def {name}(");
    for line in text.lines() {
        let mut from = 0;
        while let Some(rel) = line[from..].find(&needle) {
            let start = from + rel;
            from = start + needle.len();
            if start > 0 && scan::is_ident_byte(line.as_bytes()[start - 1]) {
                continue;
            }
            let open = start + needle.len() - 1;
            let Some(close) = scan::matching_close(line, open) else {
                continue;
            };
            let rest = &line[close + 1..];
            let head = scan::split_top_level(rest, b':')[0].trim();
            let mut proto = line[start..=close].to_string();
            if head.starts_with("->") {
                proto.push(' ');
                proto.push_str(head);
            }
            return Some(proto);
        }
    }
    None
}

/// Interprets a translator completion. The prototype comes from a matching
/// `def` line or is synthesized; the English instruction is what remains once
/// `def` lines and code fences are dropped.
pub fn parse_translation(sig: &FunctionSignature, completion: &str) -> Result<TranslatedInstruction, TranslateError> {
    let completion = completion.trim();
    if completion.is_empty() {
        return Err(TranslateError::EmptyCompletion);
    }
    let normalized_prototype =
        extract_prototype(completion, &sig.name).unwrap_or_else(|| synthesize_prototype(&sig.call_form));
    let prose: Vec<&str> = completion
        .lines()
        .filter(|l| {
            let l = l.trim_start();
            !l.starts_with("def ") && !l.starts_with("```")
        })
        .collect();
    Ok(TranslatedInstruction { text_en: prose.join("\n").trim().to_string(), normalized_prototype })
}

pub fn translate(
    task: &Task,
    glossary: &Glossary,
    llm: &dyn ChatBackend,
    config: &GenerationConfig,
) -> Result<TranslatedInstruction, TranslateError> {
    let sig = parse_signature(task)?;
    let prompt = render_translation_prompt(&task.instruction_bn, &task.unit_tests[0], glossary);
    let ctx = CallContext { stage: Stage::Translator, task_id: &task.id, attempt: 1 };
    let completion = llm.complete(ctx, &prompt, config)?;
    parse_translation(&sig, &completion.text)
}
