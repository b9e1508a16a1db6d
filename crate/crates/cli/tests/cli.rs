use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cohop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohop")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = cohop(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn dataset(dir: &Path) -> PathBuf {
    let path = dir.join("sbm");
    ok(&[
        "generate-sbm",
        "--out",
        path.to_str().unwrap(),
        "--nodes",
        "240",
        "--seed",
        "3",
    ]);
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn strip_timings(mut v: Value) -> Value {
    for s in v["per_seed"].as_array_mut().unwrap() {
        s.as_object_mut().unwrap().remove("timings");
    }
    v
}

#[test]
fn train_reports_one_accuracy_per_seed_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "train",
            "--dataset",
            data.to_str().unwrap(),
            "--seeds",
            "4",
            "--epochs",
            "20",
            "--out",
            out.to_str().unwrap(),
        ]);
        read_json(&out)
    };
    let a = run("a.json");
    let b = run("b.json");
    assert_eq!(a["schema_version"], 1);
    assert_eq!(a["accuracies"].as_array().unwrap().len(), 4);
    assert_eq!(a["config"]["train"]["epochs"], 20);
    assert_eq!(strip_timings(a), strip_timings(b));
}

#[test]
fn ablation_flag_matches_component_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let d = data.to_str().unwrap();
    let cell = dir.path().join("cell.json");
    let flags = dir.path().join("flags.json");
    ok(&[
        "train",
        "--dataset",
        d,
        "--seeds",
        "2",
        "--epochs",
        "15",
        "--ablation",
        "base",
        "--out",
        cell.to_str().unwrap(),
    ]);
    ok(&[
        "train",
        "--dataset",
        d,
        "--seeds",
        "2",
        "--epochs",
        "15",
        "--no-histograms",
        "--no-consistency",
        "--no-iterations",
        "--out",
        flags.to_str().unwrap(),
    ]);
    assert_eq!(read_json(&cell)["accuracies"], read_json(&flags)["accuracies"]);
}

#[test]
fn inductive_report_has_prod() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("ind.json");
    let csv = dir.path().join("ind.csv");
    ok(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--mode",
        "inductive",
        "--seeds",
        "2",
        "--epochs",
        "15",
        "--out",
        out.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    let r = read_json(&out);
    for s in r["per_seed"].as_array().unwrap() {
        let (seen, unseen, prod) = (
            s["seen_acc"].as_f64().unwrap(),
            s["unseen_acc"].as_f64().unwrap(),
            s["prod"].as_f64().unwrap(),
        );
        assert!((prod - (0.8 * seen + 0.2 * unseen)).abs() <= 1e-9);
    }
    let csv = std::fs::read_to_string(&csv).unwrap();
    assert!(csv.starts_with("mode,seeds,mean,std,seen_mean,unseen_mean,prod_mean\ninductive,2,"));
}

#[test]
fn checkpoint_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let d = data.to_str().unwrap();
    let ckpt = dir.path().join("ckpt");
    let report = dir.path().join("r.json");
    ok(&[
        "train",
        "--dataset",
        d,
        "--seeds",
        "2",
        "--seed-base",
        "7",
        "--epochs",
        "20",
        "--checkpoint-dir",
        ckpt.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    let r = read_json(&report);
    let out = ok(&[
        "eval",
        "--dataset",
        d,
        "--checkpoint",
        ckpt.join("seed-8.cohm").to_str().unwrap(),
        "--seed",
        "8",
    ]);
    let eval: Value = serde_json::from_slice(&out.stdout).unwrap();
    let logged = &r["per_seed"][1];
    assert_eq!(eval["seed"], 8);
    assert_eq!(eval["test_acc"], logged["test_acc"]);
    assert_eq!(
        eval["val_acc"],
        logged["iterations"].as_array().unwrap().last().unwrap()["val_acc"]
    );

    // A checkpoint trained without histograms is narrower than the default features.
    let narrow = dir.path().join("narrow");
    ok(&[
        "train",
        "--dataset",
        d,
        "--seeds",
        "1",
        "--epochs",
        "5",
        "--no-histograms",
        "--checkpoint-dir",
        narrow.to_str().unwrap(),
    ]);
    let out = cohop(&[
        "eval",
        "--dataset",
        d,
        "--checkpoint",
        narrow.join("seed-0.cohm").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("20") && err.contains("16"), "{err}");
}

#[test]
fn ablate_prints_table_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("ab.json");
    let o = ok(&[
        "ablate",
        "--dataset",
        data.to_str().unwrap(),
        "--seeds",
        "2",
        "--epochs",
        "10",
        "--cells",
        "full,base,consistency+histograms",
        "--out",
        out.to_str().unwrap(),
    ]);
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.lines().nth(3).unwrap().starts_with("consistency+histograms"));
    assert_eq!(read_json(&out)["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn bench_emits_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let o = ok(&[
        "bench-histograms",
        "--dataset",
        data.to_str().unwrap(),
        "--ells",
        "1,4",
        "--trials",
        "2",
        "--timing-only",
    ]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["ell"], 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let d = data.to_str().unwrap();

    let out = cohop(&["train", "--dataset", d, "--approx-histograms", "--no-histograms"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    assert_eq!(cohop(&["train", "--dataset", d, "--tau", "1.5"]).status.code(), Some(2));
    assert_eq!(cohop(&["train", "--dataset", d, "--seeds", "0"]).status.code(), Some(2));
    assert_eq!(
        cohop(&["ablate", "--dataset", d, "--cells", "nonsense"]).status.code(),
        Some(2)
    );

    let missing = dir.path().join("missing");
    assert_eq!(
        cohop(&["train", "--dataset", missing.to_str().unwrap()]).status.code(),
        Some(3)
    );

    std::fs::write(data.join("labels.tsv"), "0\tnot-a-class\n").unwrap();
    assert_eq!(cohop(&["train", "--dataset", d]).status.code(), Some(3));
}
