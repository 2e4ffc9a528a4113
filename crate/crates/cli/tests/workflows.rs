//! End-to-end tests of the compiled binary against the synthetic corpus:
//! every command, the documented exit codes, and bit-reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_chronoprompt");

const CONFIG: &str = r#"
schema = "synthetic-order"
seed = 7

[paths]
data = "synthetic"
templates = "runs/pool.jsonl"
runs = "runs"

[train]
batch_size = 16
epochs = 10
learning_rate = 0.1
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
        Workspace { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .current_dir(self.path())
            .args(["--config", "run.toml"])
            .args(args)
            .env_remove("CHRONOPROMPT_RUNS")
            .output()
            .expect("binary runs")
    }

    fn run_ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "command {args:?} failed:\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    /// Small-beam generation so template scoring stays fast.
    fn generate(&self) {
        self.run_ok(&["generate-templates", "--beam-width", "2", "--scoring-epochs", "2"]);
    }

    fn train(&self) -> PathBuf {
        let stdout = self.run_ok(&["train"]);
        let line = stdout
            .lines()
            .find(|l| l.contains("artifacts in "))
            .expect("train reports its run directory");
        let dir = line.rsplit("artifacts in ").next().unwrap().trim();
        self.path().join(dir)
    }
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn full_workflow_produces_all_artifacts() {
    let ws = Workspace::new();
    ws.generate();
    assert!(ws.path().join("runs/pool.jsonl").is_file());

    let run_dir = ws.train();
    for artifact in ["meta.json", "history.jsonl", "checkpoint.json", "dev_metrics.json", "test_metrics.json"]
    {
        assert!(run_dir.join(artifact).is_file(), "missing {artifact}");
    }

    let checkpoint = run_dir.join("checkpoint.json");
    let ckpt = checkpoint.to_str().unwrap();

    let stdout = ws.run_ok(&["eval", "--checkpoint", ckpt, "--split", "dev", "--buckets"]);
    assert!(stdout.contains("dev strict_micro"));
    assert!(run_dir.join("eval-dev-strict_micro.json").is_file());

    let graph = ws.path().join("graph.json");
    std::fs::write(
        &graph,
        r#"{"tokens": ["yesterday", "arrive", "while", "finish", "and", "march", "downtown"],
           "events": [[1, 2], [3, 4], [5, 6]]}"#,
    )
    .unwrap();
    let stdout =
        ws.run_ok(&["predict", "--checkpoint", ckpt, "--input", graph.to_str().unwrap()]);
    assert!(stdout.contains("3 events -> 6 edges"));
    assert!(run_dir.join("predicted_graph.json").is_file());

    let stdout = ws.run_ok(&["export-reprs", "--checkpoint", ckpt, "--split", "dev"]);
    assert!(stdout.contains("20 rows"));
    let tsv = std::fs::read_to_string(run_dir.join("reprs-dev.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 21);
    assert!(tsv.starts_with("instance_id\tlabel\th0\t"));
}

#[test]
fn training_is_bit_reproducible() {
    let ws = Workspace::new();
    ws.generate();
    ws.run_ok(&["--out", "a", "train"]);
    ws.run_ok(&["--out", "b", "train"]);

    let a_run = std::fs::read_dir(ws.path().join("a")).unwrap().next().unwrap().unwrap();
    let b_run = ws.path().join("b").join(a_run.file_name());
    assert!(b_run.is_dir(), "both roots use the same content-addressed name");
    for artifact in ["meta.json", "history.jsonl", "checkpoint.json", "dev_metrics.json", "test_metrics.json"]
    {
        let a_bytes = std::fs::read(a_run.path().join(artifact)).unwrap();
        let b_bytes = std::fs::read(b_run.join(artifact)).unwrap();
        assert_eq!(a_bytes, b_bytes, "{artifact} differs between identical runs");
    }
}

#[test]
fn rerunning_without_force_is_refused() {
    let ws = Workspace::new();
    ws.generate();
    ws.train();
    let out = ws.run(&["train"]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    ws.run_ok(&["train", "--force"]);
}

#[test]
fn missing_artifacts_exit_3() {
    let ws = Workspace::new();
    let out = ws.run(&["eval", "--checkpoint", "runs/nope.json"]);
    assert_eq!(exit_code(&out), 3);
    let out = ws.run(&["train"]);
    assert_eq!(exit_code(&out), 3, "template pool absent");
}

#[test]
fn usage_errors_exit_2() {
    let ws = Workspace::new();
    ws.generate();

    let out = ws.run(&["--backend", "external", "train"]);
    assert_eq!(exit_code(&out), 2);

    let out = ws.run(&["train", "--sweep", "gamma=1"]);
    assert_eq!(exit_code(&out), 2);

    let bad = CONFIG.replace("batch_size = 16", "batch_size = 1");
    std::fs::write(ws.path().join("bad.toml"), bad).unwrap();
    let out = Command::new(BIN)
        .current_dir(ws.path())
        .args(["--config", "bad.toml", "train"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch_size"));

    let out = Command::new(BIN)
        .current_dir(ws.path())
        .args(["--config", "absent.toml", "train"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn ablation_flags_map_to_new_runs() {
    let ws = Workspace::new();
    ws.generate();
    let base = ws.train();
    let stdout = ws.run_ok(&["train", "--aux", "off", "--contrastive", "off"]);
    let line = stdout.lines().find(|l| l.contains("artifacts in ")).unwrap();
    let ablated = ws.path().join(line.rsplit("artifacts in ").next().unwrap().trim());
    assert_ne!(base, ablated, "ablation changes the config hash");

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ablated.join("meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["config"]["train"]["aux_mode"], "off");
    assert_eq!(meta["config"]["train"]["con_enabled"], false);

    // With both auxiliary terms off, every logged step satisfies
    // l_total == l_tre bit for bit.
    let history = std::fs::read_to_string(ablated.join("history.jsonl")).unwrap();
    assert!(!history.is_empty());
    for line in history.lines() {
        let step: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(step["l_total"], step["l_tre"]);
        assert_eq!(step["l_ter"], 0.0);
        assert_eq!(step["l_con"], 0.0);
    }
}

#[test]
fn sweep_writes_aggregate_report() {
    let ws = Workspace::new();
    ws.generate();
    let stdout = ws.run_ok(&["train", "--sweep", "tau=0.1,0.4", "--force"]);
    assert!(stdout.contains("swept tau over 2 values"));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ws.path().join("runs/sweep-tau.json")).unwrap(),
    )
    .unwrap();
    let points = report.as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[0]["value"], 0.1);
    assert!(points[0]["dev_f1"].as_f64().unwrap() >= 0.0);
}

#[test]
fn manual_template_trains_without_a_pool() {
    let ws = Workspace::new();
    let stdout = ws.run_ok(&[
        "train",
        "--manual-template",
        "{sent} The temporal relation between {e1} and {e2} is {mask} .",
    ]);
    assert!(stdout.contains("best epoch"));
}

#[test]
fn seed_flag_changes_the_run_directory() {
    let ws = Workspace::new();
    ws.generate();
    let a = ws.train();
    let stdout = ws.run_ok(&["--seed", "8", "train"]);
    let line = stdout.lines().find(|l| l.contains("artifacts in ")).unwrap();
    let b = ws.path().join(line.rsplit("artifacts in ").next().unwrap().trim());
    assert_ne!(a, b);
    assert!(b.file_name().unwrap().to_str().unwrap().ends_with("-s8"));
}
