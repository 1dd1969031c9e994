use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use amgae_core::compute::Tensor;
use amgae_core::graph::{write_node_dataset, Graph, SplitMasks};

fn amgae(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amgae"))
        .args(args)
        .current_dir(cwd)
        .env("AMGAE_OUTPUT_ROOT", cwd.join("runs"))
        .env_remove("AMGAE_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: Output) -> serde_json::Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr is one JSON object")
}

fn ring_dataset(dir: &Path, n: usize, d: usize) {
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).chain((0..n - 2).map(|i| (i, i + 2))).collect();
    let mut f = Tensor::zeros(n, d);
    for i in 0..n {
        f.set(i, i % d, 1.0);
        f.set(i, (i / 2) % d, 0.5);
    }
    let labels = (0..n).map(|i| (i % 3) as i64).collect();
    let idx: Vec<usize> = (0..n).collect();
    let g = Graph::from_edges(n, &edges, f)
        .unwrap()
        .with_labels(labels)
        .unwrap()
        .with_splits(SplitMasks::from_indices(n, &idx[..n / 3], &idx[n / 3..n / 2], &idx[n / 2..]).unwrap())
        .unwrap();
    write_node_dataset(dir, &g).unwrap();
}

struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        ring_dataset(&root.join("data/ring"), 48, 6);
        ring_dataset(&root.join("data/narrow"), 30, 4);
        for task in ["node", "edge"] {
            let body = format!(
                "task = \"{task}\"\ndataset = \"ring\"\nmaster_seed = 5\nepochs = 2\nbatch_size = 8\n\
                 sampler.seed_count = 16\nmodel.d_h = 8\nmodel.d_disc = 4\neval.seeds = 2\neval.probe_epochs = 30\n"
            );
            fs::write(root.join(format!("{task}.toml")), body).unwrap();
        }
        Self { _tmp: tmp, root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        amgae(args, &self.root)
    }
}

#[test]
fn train_writes_every_artifact() {
    let ws = Workspace::new();
    ok(ws.run(&["train", "--config", "node.toml"]));
    let out = ws.path("runs/train/node");
    for f in ["resolved.toml", "config_hash", "history.jsonl", "timings.jsonl", "final.ckpt", "best.ckpt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert_eq!(fs::read_to_string(out.join("history.jsonl")).unwrap().lines().count(), 2);
    let hash = fs::read_to_string(out.join("config_hash")).unwrap();

    ok(ws.run(&["train", "--config", "runs/train/node/resolved.toml", "--out", "again"]));
    assert_eq!(fs::read_to_string(ws.path("again/config_hash")).unwrap(), hash);
    assert_eq!(fs::read(ws.path("again/final.ckpt")).unwrap(), fs::read(out.join("final.ckpt")).unwrap());
}

#[test]
fn full_mask_is_rejected_before_training() {
    let ws = Workspace::new();
    let err = error_json(ws.run(&["train", "--config", "node.toml", "--set", "model.mask_ratio=1.0", "--out", "x"]));
    assert_eq!(err["code"], "config");
    assert!(err["message"].as_str().unwrap().contains("mask_ratio"));
    assert!(err["context"].is_object());
    assert!(!ws.path("x").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let ws = Workspace::new();
    let err = error_json(ws.run(&["train", "--config", "node.toml", "--set", "model.mask_rate=0.3"]));
    assert_eq!(err["code"], "config");
    assert!(err["message"].as_str().unwrap().contains("model.mask_rate"));
}

#[test]
fn missing_dataset_is_reported() {
    let ws = Workspace::new();
    let err = error_json(ws.run(&["train", "--config", "node.toml", "--set", "dataset=nowhere"]));
    assert_eq!(err["code"], "missing_file");
}

#[test]
fn eval_reports_every_seed_and_checks_dimensions() {
    let ws = Workspace::new();
    ok(ws.run(&["train", "--config", "node.toml", "--out", "t"]));
    let stdout = ok(ws.run(&["eval", "--config", "node.toml", "--checkpoint", "t/final.ckpt", "--out", "e"]));
    assert!(stdout.contains("accuracy"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.path("e/report.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["accuracy"]["values"].as_array().unwrap().len(), 2);

    let err = error_json(ws.run(&[
        "eval", "--config", "node.toml", "--set", "dataset=narrow", "--checkpoint", "t/final.ckpt", "--out", "e2",
    ]));
    assert_eq!(err["code"], "dimension");
}

#[test]
fn link_eval_reports_auc_and_ap() {
    let ws = Workspace::new();
    ok(ws.run(&["train", "--config", "edge.toml", "--out", "t"]));
    assert!(ws.path("t/edge_pool.bin").exists());
    ok(ws.run(&["eval", "--config", "edge.toml", "--checkpoint", "t/final.ckpt", "--out", "e"]));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.path("e/report.json")).unwrap()).unwrap();
    for key in ["auc", "ap"] {
        assert!(report["metrics"][key]["mean"].as_f64().unwrap().is_finite());
    }
}

#[test]
fn single_ratio_sweep_equals_plain_run() {
    let ws = Workspace::new();
    ok(ws.run(&["sweep", "--config", "node.toml", "--ratios", "0.5", "--out", "s"]));
    let csv = fs::read_to_string(ws.path("s/sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).filter(|l| l.contains(",accuracy,")).collect();
    assert_eq!(rows.len(), 1);

    ok(ws.run(&["train", "--config", "node.toml", "--out", "t"]));
    ok(ws.run(&["eval", "--config", "node.toml", "--checkpoint", "t/final.ckpt", "--out", "e"]));
    let sweep: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.path("s/sweep.json")).unwrap()).unwrap();
    let plain: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.path("e/report.json")).unwrap()).unwrap();
    let row = sweep.as_array().unwrap().iter().find(|r| r["metric"] == "accuracy").unwrap();
    assert_eq!(row["values"], plain["metrics"]["accuracy"]["values"]);
}

#[test]
fn ablation_has_four_rows_and_no_discriminator_updates_without_dis() {
    let ws = Workspace::new();
    let stdout = ok(ws.run(&["ablate", "--config", "node.toml", "--out", "a"]));
    assert_eq!(stdout.lines().count(), 4);
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.path("a/ablation.json")).unwrap()).unwrap();
    let acc: Vec<_> = rows.as_array().unwrap().iter().filter(|r| r["metric"] == "accuracy").collect();
    assert_eq!(acc.len(), 4);
    let wo_dis = acc.iter().find(|r| r["variant"] == "w/o dis").unwrap();
    assert_eq!(wo_dis["disc_updates"], 0);
    let full = acc.iter().find(|r| r["variant"] == "full").unwrap();
    assert!(full["disc_updates"].as_u64().unwrap() > 0);
    for r in &acc {
        assert!(r["mean"].as_f64().unwrap().is_finite());
    }
    for d in ["full", "wo-dis", "wo-rec", "wo-mask"] {
        assert!(ws.path(&format!("a/{d}/history.jsonl")).exists());
    }
}

#[test]
fn report_summarizes_reports() {
    let ws = Workspace::new();
    ok(ws.run(&["train", "--config", "node.toml", "--out", "t"]));
    ok(ws.run(&["eval", "--config", "node.toml", "--checkpoint", "t/final.ckpt", "--out", "e"]));
    let table = ok(ws.run(&["report", "e"]));
    assert!(table.lines().any(|l| l.contains("| accuracy |")));
    let err = error_json(ws.run(&["report", "absent"]));
    assert_eq!(err["code"], "missing_file");
}

#[test]
fn prepare_tu_collection() {
    let ws = Workspace::new();
    let raw = ws.path("raw");
    fs::create_dir_all(&raw).unwrap();
    fs::write(raw.join("T_A.txt"), "1, 2\n2, 1\n3, 4\n4, 3\n").unwrap();
    fs::write(raw.join("T_graph_indicator.txt"), "1\n1\n2\n2\n").unwrap();
    fs::write(raw.join("T_graph_labels.txt"), "1\n-1\n").unwrap();
    let stdout = ok(ws.run(&["prepare", "tu", "--dir", "raw", "--name", "T", "--out", "data/t"]));
    assert!(stdout.contains("2 graphs"));
    assert!(ws.path("data/t/graph_indicator.txt").exists());
}
