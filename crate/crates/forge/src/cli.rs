//! Command-line interface.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use forge_core::corpus::{build_store, ExampleStore, Task};
use forge_core::engine::{Clients, ExampleIndex, ExamplesMode, PipelineConfig, TaskResult};
use forge_core::eval::{emit_report, pass_at_1, run_ablation, AblationGrid, EvalReport, ReportFormat};
use forge_core::llm::{GenerationConfig, MockBackend};
use forge_core::retriever::Vectorizer;
use forge_core::sandbox::{compose, hint, Executor, Origin};
use forge_core::translator::{translate, Glossary};
use serde::{Deserialize, Serialize};

use crate::exec::{ProcessExecutor, DEFAULT_MEMORY_BYTES};
use crate::http::{HttpBackend, API_BASE_VAR, DEFAULT_API_BASE};
use crate::io::{self, LoadError};
use crate::split::{run_split, SplitContext};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.json";
pub const REPORT_FILE: &str = "report.csv";
pub const FAILURES_DIR: &str = "failures";

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Retrieval-augmented Bangla-to-Python code generation")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve every task of a split and score it.
    Solve(RunArgs),
    /// Solve a split once per configuration of an ablation grid.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// JSON object mapping axis names to value lists.
        #[arg(long)]
        grid: PathBuf,
    },
    /// Re-run from a manifest written by an earlier solve or ablate.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate one task and print the result as JSON.
    Translate {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        task_id: String,
        #[arg(long)]
        glossary: Option<PathBuf>,
        #[command(flatten)]
        models: ModelArgs,
    },
    /// Print the top-k store examples for one task.
    Retrieve {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        task_id: String,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// English rendering of the instruction to add to the query.
        #[arg(long, default_value = "")]
        en: String,
        /// Use a saved vectorizer instead of refitting.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Run a source file against one task's public tests.
    Exec {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        task_id: String,
        #[arg(long)]
        code: PathBuf,
        #[arg(long, default_value_t = 10)]
        timeout_secs: u64,
        #[command(flatten)]
        runner: RunnerArgs,
        /// Keep the work directory of a failed run under this directory.
        #[arg(long)]
        keep_failures: Option<PathBuf>,
    },
    /// Build an example store from solved task splits.
    BuildStore {
        /// Task files with `response`; may be repeated.
        #[arg(long, required = true)]
        tasks: Vec<PathBuf>,
        /// JSON object from task id to English instruction.
        #[arg(long)]
        translations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the fitted vectorizer.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rag,
    Manual,
    None,
}

impl From<ModeArg> for ExamplesMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rag => ExamplesMode::Rag,
            ModeArg::Manual => ExamplesMode::Manual,
            ModeArg::None => ExamplesMode::None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Scripted responses keyed by `stage/task_id/attempt`; replaces every model.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// Model for every stage without its own `--model-*`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub model_translator: Option<String>,
    #[arg(long)]
    pub model_coder: Option<String>,
    #[arg(long)]
    pub model_reviewer: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RunnerArgs {
    /// Runner command; the program path and limits are appended.
    #[arg(long, default_value = "runner")]
    pub runner: String,
    #[arg(long, default_value_t = DEFAULT_MEMORY_BYTES)]
    pub mem_bytes: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub tasks: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Tab-separated `bangla<TAB>english` lines.
    #[arg(long)]
    pub glossary: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub max_iters: u32,
    #[arg(long, default_value_t = 10)]
    pub timeout_secs: u64,
    #[arg(long)]
    pub no_translate: bool,
    #[arg(long)]
    pub no_glossary: bool,
    #[arg(long)]
    pub no_reviewer: bool,
    #[arg(long)]
    pub no_feedback: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Rag)]
    pub examples_mode: ModeArg,
    /// Comma-separated store ids for `--examples-mode manual`.
    #[arg(long, value_delimiter = ',')]
    pub manual_ids: Option<Vec<String>>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub parallelism: u64,
    /// Keep work directories of failed executions under `<out>/failures`.
    #[arg(long)]
    pub keep_failures: bool,
    /// Saved vectorizer for the store, instead of refitting.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[command(flatten)]
    pub models: ModelArgs,
    #[command(flatten)]
    pub runner: RunnerArgs,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn runtime(message: impl fmt::Display) -> Self {
        Self { code: 1, message: message.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        Self::runtime(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageModels {
    pub translator: Option<String>,
    pub coder: Option<String>,
    pub reviewer: Option<String>,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: PipelineConfig,
    pub tasks_path: PathBuf,
    pub store_path: PathBuf,
    pub snapshot_path: Option<PathBuf>,
    pub glossary_path: Option<PathBuf>,
    pub grid_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub mock_fixture: Option<PathBuf>,
    pub models: StageModels,
    pub backends: BTreeMap<String, String>,
    pub api_base: Option<String>,
    pub runner: Vec<String>,
    pub memory_bytes: u64,
    pub parallelism: u64,
    pub keep_failures: bool,
    pub determinism: String,
}

fn resolve_models(m: &ModelArgs) -> Result<StageModels, CliError> {
    let pick = |own: &Option<String>, stage: &str| -> Result<Option<String>, CliError> {
        if m.mock.is_some() {
            return Ok(None);
        }
        own.clone()
            .or_else(|| m.model.clone())
            .map(Some)
            .ok_or_else(|| CliError::usage(format!("no model for the {stage} stage: pass --model, --model-{stage} or --mock")))
    };
    Ok(StageModels {
        translator: pick(&m.model_translator, "translator")?,
        coder: pick(&m.model_coder, "coder")?,
        reviewer: pick(&m.model_reviewer, "reviewer")?,
    })
}

/// Splits the runner command on whitespace. Relative paths that exist are made
/// absolute because the runner starts inside the program's work directory.
fn parse_runner(line: &str) -> Result<Vec<String>, CliError> {
    let parts: Vec<String> = line
        .split_whitespace()
        .map(|p| {
            let path = Path::new(p);
            if p.contains('/') && path.is_relative() && path.exists() {
                std::path::absolute(path).map_or_else(|_| p.to_owned(), |a| a.display().to_string())
            } else {
                p.to_owned()
            }
        })
        .collect();
    if parts.is_empty() {
        return Err(CliError::usage("--runner must name a program"));
    }
    Ok(parts)
}

impl RunArgs {
    fn to_manifest(&self, grid: Option<&Path>) -> Result<RunManifest, CliError> {
        let mode: ExamplesMode = self.examples_mode.into();
        match (mode, &self.manual_ids) {
            (ExamplesMode::Manual, None) => return Err(CliError::usage("--examples-mode manual requires --manual-ids")),
            (ExamplesMode::Manual, Some(ids)) if ids.iter().all(|s| s.trim().is_empty()) => {
                return Err(CliError::usage("--manual-ids is empty"))
            }
            (ExamplesMode::Rag | ExamplesMode::None, Some(_)) if grid.is_none() => {
                return Err(CliError::usage("--manual-ids only applies to --examples-mode manual"))
            }
            _ => {}
        }
        let models = resolve_models(&self.models)?;
        let config = PipelineConfig {
            k: self.k,
            max_iterations: self.max_iters,
            timeout_secs: self.timeout_secs,
            use_translation: !self.no_translate,
            use_glossary: !self.no_glossary,
            use_reviewer: !self.no_reviewer,
            use_feedback: !self.no_feedback,
            examples_mode: mode,
            manual_example_ids: self
                .manual_ids
                .as_ref()
                .map(|ids| ids.iter().map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect()),
            translator: GenerationConfig::default(),
            coder: GenerationConfig::default(),
            reviewer: GenerationConfig::default(),
        };
        let mocked = self.models.mock.is_some();
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config,
            tasks_path: self.tasks.clone(),
            store_path: self.store.clone(),
            snapshot_path: self.snapshot.clone(),
            glossary_path: self.glossary.clone(),
            grid_path: grid.map(Path::to_owned),
            out_dir: self.out.clone(),
            mock_fixture: self.models.mock.clone(),
            models,
            backends: BTreeMap::new(),
            api_base: (!mocked).then(|| std::env::var(API_BASE_VAR).unwrap_or_else(|_| DEFAULT_API_BASE.to_owned())),
            runner: parse_runner(&self.runner.runner)?,
            memory_bytes: self.runner.mem_bytes,
            parallelism: self.parallelism,
            keep_failures: self.keep_failures,
            determinism: if mocked {
                "scripted mock backend: reruns with the same fixture reproduce transcripts and reports byte for byte".into()
            } else {
                "remote sampling backends: reruns are not expected to be byte-identical".into()
            },
        })
    }
}

enum Backends {
    Mock(MockBackend),
    Http { translator: HttpBackend, coder: HttpBackend, reviewer: HttpBackend },
}

impl Backends {
    fn load(mock: Option<&Path>, models: &StageModels) -> Result<Self, CliError> {
        if let Some(path) = mock {
            let text = io::read_text(path)?;
            return MockBackend::from_json(&text)
                .map(Backends::Mock)
                .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())));
        }
        let http = |m: &Option<String>| {
            m.as_deref().map(HttpBackend::from_env).ok_or_else(|| CliError::usage("missing model name"))
        };
        Ok(Backends::Http {
            translator: http(&models.translator)?,
            coder: http(&models.coder)?,
            reviewer: http(&models.reviewer)?,
        })
    }

    fn clients(&self) -> Clients<'_> {
        match self {
            Backends::Mock(m) => Clients::shared(m),
            Backends::Http { translator, coder, reviewer } => Clients { translator, coder, reviewer },
        }
    }
}

fn find_task<'a>(tasks: &'a [Task], id: &str) -> Result<&'a Task, CliError> {
    tasks.iter().find(|t| t.id == id).ok_or_else(|| CliError::runtime(format!("no task with id `{id}`")))
}

fn load_index(store_path: &Path, snapshot: Option<&Path>) -> Result<Option<ExampleIndex>, CliError> {
    let store = io::load_store(store_path)?;
    if store.is_empty() {
        return Ok(None);
    }
    let vectorizer = match snapshot {
        Some(p) => io::load_snapshot(p)?,
        None => Vectorizer::fit(&store).map_err(CliError::runtime)?,
    };
    if vectorizer.document_count() != store.len() {
        return Err(CliError::runtime("vectorizer snapshot does not match the store"));
    }
    Ok(Some(ExampleIndex { store, vectorizer }))
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Inputs loaded from a manifest, shared by solve and ablate.
struct Prepared {
    tasks: Vec<Task>,
    index: Option<ExampleIndex>,
    glossary: Glossary,
    backends: Backends,
    executor: ProcessExecutor,
}

fn prepare(m: &mut RunManifest) -> Result<Prepared, CliError> {
    let tasks = io::load_tasks(&m.tasks_path, false)?;
    let index = load_index(&m.store_path, m.snapshot_path.as_deref())?;
    let glossary = match &m.glossary_path {
        Some(p) => io::load_glossary(p)?,
        None => Glossary::default(),
    };
    let backends = Backends::load(m.mock_fixture.as_deref(), &m.models)?;
    let clients = backends.clients();
    m.backends = [("translator", clients.translator), ("coder", clients.coder), ("reviewer", clients.reviewer)]
        .into_iter()
        .map(|(k, b)| (k.to_owned(), b.describe()))
        .collect();
    let mut executor = ProcessExecutor::new(m.runner.clone());
    executor.memory_bytes = m.memory_bytes;
    executor.keep_failures = m.keep_failures.then(|| m.out_dir.join(FAILURES_DIR));
    Ok(Prepared { tasks, index, glossary, backends, executor })
}

fn solve_into(p: &Prepared, config: &PipelineConfig, parallelism: u64, dir: &Path) -> Result<Vec<TaskResult>, CliError> {
    let ctx = SplitContext {
        index: p.index.as_ref(),
        glossary: &p.glossary,
        clients: p.backends.clients(),
        executor: &p.executor as &dyn Executor,
        config,
    };
    Ok(run_split(&p.tasks, ctx, parallelism as usize, Some(dir))?)
}

fn write_outputs(dir: &Path, results: &[TaskResult], report: &EvalReport) -> Result<(), CliError> {
    io::write_file(&dir.join(RESULTS_FILE), &json_pretty(&results))?;
    io::write_file(&dir.join(REPORT_FILE), &emit_report(std::slice::from_ref(report), ReportFormat::Csv))?;
    Ok(())
}

fn score(results: &[TaskResult], config: &PipelineConfig) -> Result<EvalReport, CliError> {
    pass_at_1(results, &config.fingerprint()).map_err(|_| CliError::runtime("the task file has no tasks"))
}

pub fn execute_manifest(mut m: RunManifest) -> Result<(), CliError> {
    let grid = match &m.grid_path {
        Some(p) => Some(AblationGrid::from_json(&io::read_text(p)?).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let prepared = prepare(&mut m)?;
    let configs = match &grid {
        Some(g) => g.configs(&m.config).map_err(|e| CliError::usage(e.to_string()))?,
        None => vec![m.config.clone()],
    };
    for c in &configs {
        c.validate(prepared.index.as_ref()).map_err(|e| CliError::runtime(format!("{}: {e}", c.fingerprint())))?;
    }
    io::write_file(&m.out_dir.join(MANIFEST_FILE), &json_pretty(&m))?;

    let Some(grid) = grid else {
        let results = solve_into(&prepared, &m.config, m.parallelism, &m.out_dir)?;
        let report = score(&results, &m.config)?;
        write_outputs(&m.out_dir, &results, &report)?;
        println!("{}: solved {}/{} ({})", report.config_fingerprint, report.solved, report.total, report.pass_at_1_text());
        return Ok(());
    };

    let mut failure: Option<CliError> = None;
    let rows = run_ablation(&m.config, &grid, |c| {
        let dir = m.out_dir.join(c.fingerprint());
        let solved = solve_into(&prepared, c, m.parallelism, &dir)
            .and_then(|r| io::write_file(&dir.join(RESULTS_FILE), &json_pretty(&r)).map(|_| r).map_err(CliError::from));
        match solved {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(e);
                Vec::new()
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let rows = rows.map_err(|_| CliError::runtime("the task file has no tasks"))?;
    let reports: Vec<EvalReport> = rows.iter().map(|(_, r)| r.clone()).collect();
    for (c, report) in &rows {
        let dir = m.out_dir.join(c.fingerprint());
        io::write_file(&dir.join(REPORT_FILE), &emit_report(std::slice::from_ref(report), ReportFormat::Csv))?;
        println!("{}: solved {}/{} ({})", report.config_fingerprint, report.solved, report.total, report.pass_at_1_text());
    }
    io::write_file(&m.out_dir.join("ablation.csv"), &emit_report(&reports, ReportFormat::Csv))?;
    io::write_file(&m.out_dir.join("ablation.md"), &emit_report(&reports, ReportFormat::Markdown))?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => execute_manifest(args.to_manifest(None)?),
        Command::Ablate { run, grid } => execute_manifest(run.to_manifest(Some(&grid))?),
        Command::Replay { manifest, out } => {
            let mut m: RunManifest = serde_json::from_str(&io::read_text(&manifest)?)
                .map_err(|e| CliError::usage(format!("{}: {e}", manifest.display())))?;
            m.out_dir = out;
            execute_manifest(m)
        }
        Command::Translate { tasks, task_id, glossary, models } => {
            let tasks = io::load_tasks(&tasks, false)?;
            let task = find_task(&tasks, &task_id)?;
            let glossary = glossary.as_deref().map(io::load_glossary).transpose()?.unwrap_or_default();
            let stage_models = resolve_models(&models)?;
            let backends = Backends::load(models.mock.as_deref(), &stage_models)?;
            let t = translate(task, &glossary, backends.clients().translator, &GenerationConfig::default())
                .map_err(CliError::runtime)?;
            print!("{}", json_pretty(&t));
            Ok(())
        }
        Command::Retrieve { tasks, task_id, store, k, en, snapshot } => {
            let tasks = io::load_tasks(&tasks, false)?;
            let task = find_task(&tasks, &task_id)?;
            let index = load_index(&store, snapshot.as_deref())?.ok_or_else(|| CliError::runtime("the store is empty"))?;
            let hits = index
                .vectorizer
                .top_k(&index.store, &task.instruction_bn, &en, k, Some(&task.id))
                .map_err(CliError::runtime)?;
            for h in hits {
                println!("{}\t{:.6}", h.example.id, h.score);
            }
            Ok(())
        }
        Command::Exec { tasks, task_id, code, timeout_secs, runner, keep_failures } => {
            if timeout_secs == 0 {
                return Err(CliError::usage("--timeout-secs must be positive"));
            }
            let tasks = io::load_tasks(&tasks, false)?;
            let task = find_task(&tasks, &task_id)?;
            let source = io::read_text(&code)?;
            let mut executor = ProcessExecutor::new(parse_runner(&runner.runner)?);
            executor.memory_bytes = runner.mem_bytes;
            executor.keep_failures = keep_failures;
            let program = compose(&source, &task.unit_tests, Origin::Coder);
            let outcome = executor.execute(&program, std::time::Duration::from_secs(timeout_secs));
            match outcome.category {
                None => println!("pass"),
                Some(cat) => {
                    println!("fail {}", cat.as_str());
                    println!("{}", outcome.describe());
                    if let Ok(h) = hint(cat) {
                        println!("hint: {h}");
                    }
                }
            }
            Ok(())
        }
        Command::BuildStore { tasks, translations, out, snapshot } => {
            let mut all = Vec::new();
            for p in &tasks {
                all.extend(io::load_tasks(p, true)?);
            }
            let translations = translations.as_deref().map(io::load_translations).transpose()?;
            let store: ExampleStore = build_store(&all, translations.as_ref()).map_err(CliError::runtime)?;
            io::write_file(&out, &store.to_json())?;
            if let Some(p) = snapshot {
                let v = Vectorizer::fit(&store).map_err(CliError::runtime)?;
                io::write_file(&p, &v.to_snapshot())?;
            }
            println!("{} examples", store.len());
            Ok(())
        }
    }
}
