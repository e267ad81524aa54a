mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> String {
    p.display().to_string()
}

fn solve_args(out: &Path) -> Vec<String> {
    vec![
        "solve".into(),
        "--tasks".into(),
        path(&fixture("tasks.json")),
        "--store".into(),
        path(&fixture("store.json")),
        "--glossary".into(),
        path(&fixture("glossary.tsv")),
        "--out".into(),
        path(out),
        "--max-iters".into(),
        "3".into(),
        "--mock".into(),
        path(&fixture("mock.json")),
        "--runner".into(),
        common::stub_runner_line(),
    ]
}

fn run(args: &[String]) -> Output {
    forge(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn mock_solve_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&solve_args(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("solved 2/3 (66.67%)"));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(report.lines().nth(1).unwrap(), "tr1-gl1-rv1-fb1-rag-k5-M3,3,2,66.67,1,0,0,1,0,0,0,0");
    let results: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    let attempts: Vec<u64> = results.as_array().unwrap().iter().map(|r| r["attempts_used"].as_u64().unwrap()).collect();
    assert_eq!(attempts, [1, 2, 3]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["max_iterations"], 3);
    assert!(manifest["backends"]["coder"].as_str().unwrap().starts_with("mock"));
    for id in ["t1", "t2", "t3"] {
        assert!(out.join(format!("transcripts/{id}.jsonl")).exists());
    }
}

#[test]
fn parallel_runs_match_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&solve_args(&a)).status.success());
    let mut args = solve_args(&b);
    args.extend(["--parallelism".into(), "3".into()]);
    assert!(run(&args).status.success());
    for f in ["results.json", "report.csv", "transcripts/t2.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn replay_reproduces_a_mock_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&solve_args(&a)).status.success());
    let o = forge(&["replay", "--manifest", &path(&a.join("manifest.json")), "--out", &path(&b)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["results.json", "report.csv", "transcripts/t1.jsonl", "transcripts/t3.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let o = forge(&["solve", "--store", "s.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let dir = tempfile::tempdir().unwrap();
    let mut args = solve_args(&dir.path().join("o"));
    args.extend(["--examples-mode".into(), "manual".into()]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());

    let mut args = solve_args(&dir.path().join("o"));
    args.retain(|a| a != "--mock" && !a.ends_with("mock.json"));
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = solve_args(&dir.path().join("o"));
    args.extend(["--examples-mode".into(), "manual".into(), "--manual-ids".into(), "nope".into()]);
    assert_eq!(run(&args).status.code(), Some(1));
    let mut args = solve_args(&dir.path().join("o"));
    args[2] = path(&dir.path().join("missing.json"));
    assert_eq!(run(&args).status.code(), Some(1));
}

#[test]
fn manual_examples_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let mut args = solve_args(&out);
    args.extend(["--examples-mode".into(), "manual".into(), "--manual-ids".into(), "s4,s1".into()]);
    assert!(run(&args).status.success());
    let t = fs::read_to_string(out.join("transcripts/t1.jsonl")).unwrap();
    assert!(t.contains(r#""examples":[{"id":"s4"},{"id":"s1"}]"#));
}

#[test]
fn ablation_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    fs::write(&grid, r#"{"M": [1, 5], "use_reviewer": [false]}"#).unwrap();
    let out = dir.path().join("ab");
    let mut args = solve_args(&out);
    args[0] = "ablate".into();
    args.extend(["--grid".into(), path(&grid)]);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains("tr1-gl1-rv0-fb1-rag-k5-M1,3,1,33.33,1"));
    let md = fs::read_to_string(out.join("ablation.md")).unwrap();
    assert!(md.lines().next().unwrap().contains("Pass@1"));
    assert!(out.join("tr1-gl1-rv0-fb1-rag-k5-M1/report.csv").exists());
    assert!(out.join("tr1-gl1-rv0-fb1-rag-k5-M1/results.json").exists());

    fs::write(&grid, "{}").unwrap();
    let out2 = dir.path().join("ab2");
    args[8] = path(&out2);
    assert!(run(&args).status.success());
    assert_eq!(fs::read_to_string(out2.join("ablation.csv")).unwrap().lines().count(), 2);

    fs::write(&grid, r#"{"M": "five"}"#).unwrap();
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn retrieve_lists_descending_scores() {
    let o = forge(&[
        "retrieve",
        "--tasks",
        &path(&fixture("tasks.json")),
        "--task-id",
        "t2",
        "--store",
        &path(&fixture("store.json")),
        "--k",
        "5",
        "--en",
        "Find the largest element of a list.",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let scores: Vec<f64> = text.lines().map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(scores.len(), 5);
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(text.starts_with("s2\t"));
}

#[test]
fn translate_prints_json() {
    let o = forge(&[
        "translate",
        "--tasks",
        &path(&fixture("tasks.json")),
        "--task-id",
        "t1",
        "--mock",
        &path(&fixture("mock.json")),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["normalized_prototype"], "def add(a: int, b: int) -> int");
    assert_eq!(v["text_en"], "Write a function to return the sum of two numbers.");
}

#[test]
fn exec_reports_category_and_hint() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("cand.py");
    fs::write(&code, "# stub: syntax\ndef add(a, b:\n").unwrap();
    let args = |code: &Path| {
        vec![
            "exec".to_string(),
            "--tasks".into(),
            path(&fixture("tasks.json")),
            "--task-id".into(),
            "t1".into(),
            "--code".into(),
            path(code),
            "--runner".into(),
            common::stub_runner_line(),
        ]
    };
    let o = run(&args(&code));
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("fail SyntaxError\n"));
    assert!(text.contains("hint: Check indentation, missing colons, or parentheses; ensure valid Python syntax."));
    fs::write(&code, "# stub: pass\ndef add(a, b):\n    return a + b\n").unwrap();
    assert_eq!(stdout(&run(&args(&code))), "pass\n");
}

#[test]
fn build_store_with_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let (store, snap) = (dir.path().join("store.json"), dir.path().join("vec.json"));
    let tr = dir.path().join("en.json");
    fs::write(&tr, r#"{"s1": "Multiply two numbers."}"#).unwrap();
    let o = forge(&[
        "build-store",
        "--tasks",
        &path(&fixture("store.json")),
        "--translations",
        &path(&tr),
        "--out",
        &path(&store),
        "--snapshot",
        &path(&snap),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "7 examples\n");
    assert!(fs::read_to_string(&store).unwrap().contains("Multiply two numbers."));
    let o = forge(&[
        "retrieve", "--tasks", &path(&fixture("tasks.json")), "--task-id", "t1",
        "--store", &path(&store), "--snapshot", &path(&snap),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 5);
}
