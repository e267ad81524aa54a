//! Pass@1 scoring, ablation grids and report tables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::engine::{ExamplesMode, PipelineConfig, TaskResult};
use crate::sandbox::ErrorCategory;

/// Failure column for unsolved tasks that never produced an execution
/// category (backend errors, translation failures).
pub const UNCLASSIFIED: &str = "Unclassified";

/// Failure columns in report order.
pub fn failure_columns() -> impl Iterator<Item = &'static str> {
    ErrorCategory::ALL.iter().map(|c| c.as_str()).chain(core::iter::once(UNCLASSIFIED))
}

/// A percentage held in hundredths of a percent, printed with two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Percent(pub u64);

impl Percent {
    /// `100 * num / den` rounded half-up to two decimals, in exact integer
    /// arithmetic.
    pub fn ratio(num: u64, den: u64) -> Self {
        assert!(den > 0, "ratio with zero denominator");
        Percent((20_000 * num + den) / (2 * den))
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: u64,
    pub solved: u64,
    pub pass_at_1: Percent,
    pub first_attempt_solved: u64,
    pub per_category_failures: BTreeMap<String, u64>,
    pub config_fingerprint: String,
}

impl EvalReport {
    /// e.g. `84.00%`.
    pub fn pass_at_1_text(&self) -> String {
        alloc::format!("{}%", self.pass_at_1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot score an empty result list")]
    EmptyResults,
    #[error("invalid ablation grid: {0}")]
    Grid(String),
}

pub fn pass_at_1(results: &[TaskResult], config_fingerprint: &str) -> Result<EvalReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    let total = results.len() as u64;
    let solved = results.iter().filter(|r| r.solved).count() as u64;
    let first_attempt_solved = results.iter().filter(|r| r.first_attempt_solved()).count() as u64;
    let mut per_category_failures: BTreeMap<String, u64> = failure_columns().map(|c| (c.to_string(), 0)).collect();
    for r in results.iter().filter(|r| !r.solved) {
        let key = r.failure_category.map_or(UNCLASSIFIED, ErrorCategory::as_str);
        *per_category_failures.get_mut(key).expect("all columns are pre-seeded") += 1;
    }
    Ok(EvalReport {
        total,
        solved,
        pass_at_1: Percent::ratio(solved, total),
        first_attempt_solved,
        per_category_failures,
        config_fingerprint: config_fingerprint.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub fn emit_report(reports: &[EvalReport], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("config_fingerprint,total,solved,pass_at_1,first_attempt_solved");
            for c in failure_columns() {
                out.push(',');
                out.push_str(c);
            }
            out.push('\n');
            for r in reports {
                out.push_str(&alloc::format!(
                    "{},{},{},{},{}",
                    r.config_fingerprint, r.total, r.solved, r.pass_at_1, r.first_attempt_solved
                ));
                for c in failure_columns() {
                    out.push_str(&alloc::format!(",{}", r.per_category_failures.get(c).copied().unwrap_or(0)));
                }
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Configuration | Total | Solved | First attempt | Pass@1 (%) |\n");
            out.push_str("|---|---:|---:|---:|---:|\n");
            for r in reports {
                out.push_str(&alloc::format!(
                    "| {} | {} | {} | {} | {} |\n",
                    r.config_fingerprint, r.total, r.solved, r.first_attempt_solved, r.pass_at_1
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    UseTranslation,
    UseGlossary,
    UseReviewer,
    UseFeedback,
    ExamplesMode,
    MaxIterations,
    K,
}

impl Axis {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "use_translation" => Axis::UseTranslation,
            "use_glossary" => Axis::UseGlossary,
            "use_reviewer" => Axis::UseReviewer,
            "use_feedback" => Axis::UseFeedback,
            "examples_mode" => Axis::ExamplesMode,
            "M" | "max_iterations" => Axis::MaxIterations,
            "k" => Axis::K,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisValue {
    Flag(bool),
    Mode(ExamplesMode),
    Count(u64),
}

/// Ordered axes; the grid is their Cartesian product with the first axis
/// varying slowest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AblationGrid {
    pub axes: Vec<(Axis, Vec<AxisValue>)>,
}

struct OrderedEntries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = OrderedEntries;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object mapping axis names to value lists")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<OrderedEntries, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    entries.push((k, v));
                }
                Ok(OrderedEntries(entries))
            }
        }
        d.deserialize_map(V)
    }
}

fn grid_err(msg: impl Into<String>) -> EvalError {
    EvalError::Grid(msg.into())
}

fn parse_value(axis: Axis, name: &str, v: &Value) -> Result<AxisValue, EvalError> {
    let bad = || grid_err(alloc::format!("bad value {v} for axis `{name}`"));
    match axis {
        Axis::UseTranslation | Axis::UseGlossary | Axis::UseReviewer | Axis::UseFeedback => {
            v.as_bool().map(AxisValue::Flag).ok_or_else(bad)
        }
        Axis::ExamplesMode => match v.as_str() {
            Some("rag") => Ok(AxisValue::Mode(ExamplesMode::Rag)),
            Some("manual") => Ok(AxisValue::Mode(ExamplesMode::Manual)),
            Some("none") => Ok(AxisValue::Mode(ExamplesMode::None)),
            _ => Err(bad()),
        },
        Axis::MaxIterations | Axis::K => v.as_u64().map(AxisValue::Count).ok_or_else(bad),
    }
}

impl AblationGrid {
    /// Grid file: `{"M": [1, 3, 5], "use_reviewer": [true, false]}`.
    pub fn from_json(json: &str) -> Result<Self, EvalError> {
        let OrderedEntries(entries) = serde_json::from_str(json).map_err(|e| grid_err(e.to_string()))?;
        let mut axes: Vec<(Axis, Vec<AxisValue>)> = Vec::with_capacity(entries.len());
        for (name, values) in entries {
            let axis = Axis::parse(&name).ok_or_else(|| grid_err(alloc::format!("unknown axis `{name}`")))?;
            if axes.iter().any(|(a, _)| *a == axis) {
                return Err(grid_err(alloc::format!("axis `{name}` given twice")));
            }
            let list = values.as_array().ok_or_else(|| grid_err(alloc::format!("axis `{name}` must be a list")))?;
            if list.is_empty() {
                return Err(grid_err(alloc::format!("axis `{name}` has no values")));
            }
            let parsed = list.iter().map(|v| parse_value(axis, &name, v)).collect::<Result<Vec<_>, _>>()?;
            axes.push((axis, parsed));
        }
        Ok(Self { axes })
    }

    /// One configuration per grid point; an empty grid yields `base` alone.
    pub fn configs(&self, base: &PipelineConfig) -> Result<Vec<PipelineConfig>, EvalError> {
        let mut configs = alloc::vec![base.clone()];
        for (axis, values) in &self.axes {
            let mut next = Vec::with_capacity(configs.len() * values.len());
            for c in &configs {
                for v in values {
                    next.push(apply(c, base, *axis, *v)?);
                }
            }
            configs = next;
        }
        Ok(configs)
    }
}

fn apply(config: &PipelineConfig, base: &PipelineConfig, axis: Axis, value: AxisValue) -> Result<PipelineConfig, EvalError> {
    let mut c = config.clone();
    match (axis, value) {
        (Axis::UseTranslation, AxisValue::Flag(b)) => c.use_translation = b,
        (Axis::UseGlossary, AxisValue::Flag(b)) => c.use_glossary = b,
        (Axis::UseReviewer, AxisValue::Flag(b)) => c.use_reviewer = b,
        (Axis::UseFeedback, AxisValue::Flag(b)) => c.use_feedback = b,
        (Axis::ExamplesMode, AxisValue::Mode(m)) => {
            c.examples_mode = m;
            c.manual_example_ids = match m {
                ExamplesMode::Manual => Some(
                    base.manual_example_ids
                        .clone()
                        .ok_or_else(|| grid_err("examples_mode `manual` needs manual example ids"))?,
                ),
                _ => None,
            };
        }
        (Axis::MaxIterations, AxisValue::Count(n)) => {
            c.max_iterations = u32::try_from(n).map_err(|_| grid_err("M out of range"))?;
        }
        (Axis::K, AxisValue::Count(n)) => c.k = n as usize,
        _ => return Err(grid_err("axis/value kind mismatch")),
    }
    Ok(c)
}

/// Runs every configuration of the grid through `run_split` and scores it.
pub fn run_ablation<F>(
    base: &PipelineConfig,
    grid: &AblationGrid,
    mut run_split: F,
) -> Result<Vec<(PipelineConfig, EvalReport)>, EvalError>
where
    F: FnMut(&PipelineConfig) -> Vec<TaskResult>,
{
    grid.configs(base)?
        .into_iter()
        .map(|c| {
            let results = run_split(&c);
            let report = pass_at_1(&results, &c.fingerprint())?;
            Ok((c, report))
        })
        .collect()
}
