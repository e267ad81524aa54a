//! Prompt rendering. Templates live in `templates/` and are filled by plain
//! `{placeholder}` substitution; braces that do not name a supplied
//! placeholder (such as the f-string in the `check` helper) are left alone.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{signature_from_tests, BilingualExample, Task};
use crate::llm::RenderedPrompt;
use crate::sandbox::{hint, ErrorCategory, ExecutionOutcome, NoHint};
use crate::scan;
use crate::translator::{extract_prototype, synthesize_prototype, TranslatedInstruction};

pub const CODER_SYSTEM: &str = include_str!("../templates/coder_system.txt");
pub const CODER_MAIN: &str = include_str!("../templates/coder_main.txt");
pub const FEEDBACK: &str = include_str!("../templates/feedback.txt");
pub const REVIEWER_SYSTEM: &str = include_str!("../templates/reviewer_system.txt");
pub const REVIEWER_MAIN: &str = include_str!("../templates/reviewer_main.txt");
pub const EXAMPLE: &str = include_str!("../templates/example.txt");
pub const TRANSLATOR_SYSTEM: &str = include_str!("../templates/translator_system.txt");

/// Single left-to-right pass; substituted values are never rescanned. The
/// template file's final newline is dropped.
pub fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let template = template.strip_suffix('\n').unwrap_or(template);
    let mut out = String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let value = after
            .find('}')
            .and_then(|close| vars.iter().find(|(k, _)| *k == &after[..close]).map(|(_, v)| (close, *v)));
        match value {
            Some((close, v)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// The failed-attempt section appended to the next coder prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBlock {
    pub last_response: String,
    pub last_error: String,
    pub fix_instructions: String,
}

impl FeedbackBlock {
    pub fn new(last_response: &str, last_error: &str, category: ErrorCategory) -> Result<Self, NoHint> {
        Ok(Self {
            last_response: last_response.to_string(),
            last_error: last_error.to_string(),
            fix_instructions: hint(category)?.to_string(),
        })
    }

    pub fn from_outcome(last_response: &str, outcome: &ExecutionOutcome) -> Option<Result<Self, NoHint>> {
        outcome.category.map(|c| Self::new(last_response, &outcome.describe(), c))
    }
}

pub fn render_feedback(feedback: &FeedbackBlock) -> String {
    substitute(
        FEEDBACK,
        &[
            ("last_response", feedback.last_response.trim_end()),
            ("last_error", feedback.last_error.trim_end()),
            ("fix_instructions", &feedback.fix_instructions),
        ],
    )
}

/// `assert <call> == <expected>` becomes `check(id, <call>, <expected>)`;
/// anything else is returned as the trimmed assert.
pub fn check_call(test: &str, id: usize) -> String {
    let test = test.trim();
    let Some(body) = test.strip_prefix("assert") else {
        return test.to_string();
    };
    let eqs = scan::top_level_eq(body);
    let has_message = scan::split_top_level(body, b',').len() > 1;
    if eqs.len() == 1 && !has_message {
        let (lhs, rhs) = (body[..eqs[0]].trim(), body[eqs[0] + 2..].trim());
        if !lhs.is_empty() && !rhs.is_empty() {
            return alloc::format!("check({id}, {lhs}, {rhs})");
        }
    }
    test.to_string()
}

fn example_function_call(example: &BilingualExample) -> String {
    let code = &example.solution_code;
    let proto = match signature_from_tests(&example.tests) {
        Ok(sig) => extract_prototype(code, &sig.name).unwrap_or_else(|| synthesize_prototype(&sig.call_form)),
        Err(_) => code
            .lines()
            .find_map(|l| l.strip_prefix("def ").and_then(|r| r.split_once('(')).map(|(n, _)| n.trim()))
            .and_then(|n| extract_prototype(code, n))
            .unwrap_or_else(|| "def solution()".into()),
    };
    proto["def ".len()..].to_string()
}

pub fn render_example(index: usize, example: &BilingualExample) -> String {
    let idx = index.to_string();
    let call = example_function_call(example);
    let checks: Vec<String> = example.tests.iter().enumerate().map(|(i, t)| check_call(t, i + 1)).collect();
    let test_main = if checks.is_empty() { "pass".to_string() } else { checks.join("\n    ") };
    substitute(
        EXAMPLE,
        &[
            ("idx", &idx),
            ("function_call", &call),
            ("instruction", &example.prompt_bn),
            ("instruction_en", &example.prompt_en),
            ("docstring", ""),
            ("solution", example.solution_code.trim_end()),
            ("test_main", &test_main),
        ],
    )
}

fn function_name(call: &str) -> &str {
    call.split_once('(').map_or(call, |(n, _)| n).trim()
}

pub fn render_coder_prompt(
    task: &Task,
    translation: &TranslatedInstruction,
    examples: &[&BilingualExample],
    feedback: Option<&FeedbackBlock>,
) -> RenderedPrompt {
    let mut rendered_examples = String::new();
    for (i, ex) in examples.iter().enumerate() {
        rendered_examples.push_str(&render_example(i + 1, ex));
        rendered_examples.push_str("\n\n");
    }
    let call = translation.function_call();
    let check_example = task.unit_tests.first().map(|t| check_call(t, 1)).unwrap_or_default();
    let mut user_text = substitute(
        CODER_MAIN,
        &[
            ("examples", &rendered_examples),
            ("function_call", call),
            ("function_name", function_name(call)),
            ("instruction", &task.instruction_bn),
            ("instruction_en", &translation.text_en),
            ("docstring", ""),
            ("check_example", &check_example),
        ],
    );
    if let Some(fb) = feedback {
        user_text.push_str("\n\n");
        user_text.push_str(&render_feedback(fb));
    }
    RenderedPrompt { system_text: substitute(CODER_SYSTEM, &[]), user_text }
}

pub fn render_reviewer_prompt(task: &Task, translation: &TranslatedInstruction, candidate_code: &str) -> RenderedPrompt {
    RenderedPrompt {
        system_text: substitute(REVIEWER_SYSTEM, &[]),
        user_text: substitute(
            REVIEWER_MAIN,
            &[
                ("instruction", &task.instruction_bn),
                ("instruction_en", &translation.text_en),
                ("existing_code", candidate_code.trim_end()),
            ],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn example(en: &str) -> BilingualExample {
        BilingualExample {
            id: "e1".into(),
            prompt_bn: "দুটি সংখ্যার গসাগু".into(),
            prompt_en: en.into(),
            solution_code: "def gcd(a, b):\n    while b:\n        a, b = b, a % b\n    return a\n".into(),
            tests: vec!["assert gcd(4, 6) == 2".into(), "assert gcd(7, 3) == 1".into()],
        }
    }

    fn task() -> Task {
        Task {
            id: "t1".into(),
            instruction_bn: "দুটি সংখ্যার যোগফল".into(),
            reference_solution: None,
            unit_tests: vec!["assert add(1, 2) == 3".into()],
        }
    }

    fn translation() -> TranslatedInstruction {
        TranslatedInstruction { text_en: "Add two numbers.".into(), normalized_prototype: "def add(a: int, b: int) -> int".into() }
    }

    #[test]
    fn substitution_is_single_pass() {
        assert_eq!(substitute("{a}{b}\n", &[("a", "{b}"), ("b", "x")]), "{b}x");
        assert_eq!(substitute("f\"{x}\" {a", &[("a", "1")]), "f\"{x}\" {a");
    }

    #[test]
    fn example_block() {
        let out = render_example(1, &example("GCD of two numbers."));
        assert_eq!(out.matches("Example 1:").count(), 1);
        assert_eq!(out.matches("Translated:").count(), 1);
        assert!(out.contains("\ndef check(test_id, test_val, expected):\n"));
        assert!(out.contains("def gcd(a, b):\n    \"\"\"দুটি সংখ্যার গসাগু\"\"\""));
        assert!(out.contains("def main():\n    check(1, gcd(4, 6), 2)\n    check(2, gcd(7, 3), 1)\n```"));
    }

    #[test]
    fn example_without_translation() {
        let out = render_example(2, &example(""));
        assert!(out.contains("    \"\"\"Translated: \"\"\"\n"));
    }

    #[test]
    fn coder_prompt_without_examples_or_feedback() {
        let p = render_coder_prompt(&task(), &translation(), &[], None);
        assert!(p.user_text.starts_with(">> Your Task"));
        assert!(p.system_text.starts_with("You are a Python programming assistant."));
        assert!(p.system_text.contains("3. Do not call main() anywhere in your code."));
        assert!(p.user_text.contains("    check(1, add(1, 2), 3)\n    # Add more unit tests"));
        assert!(p.user_text.contains("function 'add'"));
        assert!(!p.user_text.contains(">> Last failed code"));
    }

    #[test]
    fn coder_prompt_with_feedback() {
        let fb = FeedbackBlock::new("```python\nbad\n```", "Syntax Error: invalid syntax", ErrorCategory::SyntaxError).unwrap();
        let ex = example("x");
        let p = render_coder_prompt(&task(), &translation(), &[&ex], Some(&fb));
        assert_eq!(p.user_text.matches("> Suggested Fix:").count(), 1);
        assert_eq!(p.user_text.matches(">> Last failed code").count(), 1);
        assert!(p.user_text.starts_with(">> Example 1:"));
        assert!(p.user_text.ends_with("Check indentation, missing colons, or parentheses; ensure valid Python syntax."));
    }

    #[test]
    fn reviewer_prompt() {
        let p = render_reviewer_prompt(&task(), &translation(), "def add(a, b):\n    return a + b\n");
        assert!(p.system_text.contains("hidden test cases"));
        assert!(p.user_text.contains("The following function is already implemented"));
        assert!(p.user_text.ends_with("    def add(a, b):\n    return a + b\n```"));
        assert_eq!(p, render_reviewer_prompt(&task(), &translation(), "def add(a, b):\n    return a + b\n"));
    }

    #[test]
    fn check_rewrites() {
        assert_eq!(check_call("assert add(1,2)==3", 1), "check(1, add(1,2), 3)");
        assert_eq!(check_call("assert f('a==b') == 'x'", 4), "check(4, f('a==b'), 'x')");
        assert_eq!(check_call("assert math.isclose(f(1), 2.0)", 1), "assert math.isclose(f(1), 2.0)");
        assert_eq!(check_call("assert f(1) == 2, 'msg'", 1), "assert f(1) == 2, 'msg'");
        assert_eq!(check_call("assert f(1) <= 2", 1), "assert f(1) <= 2");
    }

    #[test]
    fn templates_have_no_unknown_placeholders() {
        let known = ["examples", "function_call", "function_name", "instruction", "instruction_en", "docstring",
            "check_example", "last_response", "last_error", "fix_instructions", "existing_code", "idx",
            "solution", "test_main", "glossary", "test", "test_id", "expected", "test_val"];
        for t in [CODER_SYSTEM, CODER_MAIN, FEEDBACK, REVIEWER_SYSTEM, REVIEWER_MAIN, EXAMPLE, TRANSLATOR_SYSTEM] {
            let mut rest = t;
            while let Some(i) = rest.find('{') {
                let after = &rest[i + 1..];
                let close = after.find('}').unwrap();
                assert!(known.contains(&&after[..close]), "{}", &after[..close]);
                rest = &after[close..];
            }
        }
    }
}
