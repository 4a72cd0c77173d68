mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use oilcast::cli::{EvaluationRecord, RunManifest, Selection, WeightsFile, MANIFEST_FILE};
use serde_json::Value;

use common::write_synthetic_experiment;

fn oilcast(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oilcast"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(output: Output) -> Output {
    assert!(
        output.status.success(),
        "status {:?}\nstderr: {}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn prepare_select_train_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_synthetic_experiment(tmp.path(), 360, 1);
    let out = tmp.path().join("out");

    ok(oilcast(&config, &out, &["prepare"]));
    let first = fs::read(out.join("prepared.csv")).unwrap();
    ok(oilcast(&config, &out, &["prepare"]));
    assert_eq!(first, fs::read(out.join("prepared.csv")).unwrap());
    let splits: Value = json(&out.join("splits.json"));
    assert_eq!(splits[0]["end"], "2019-08-31");
    assert_eq!(splits[1]["start"], "2019-09-01");

    ok(oilcast(&config, &out, &["select"]));
    let sel: Selection = json(&out.join("selection.json"));
    assert!(sel.selected.contains(&"sent".to_string()));
    assert!(!sel.selected.contains(&"noise".to_string()));

    ok(oilcast(&config, &out, &["train", "ext-bi-gru"]));
    let ckpt = fs::read(out.join("models/ext-bi-gru.ckpt")).unwrap();
    ok(oilcast(&config, &out, &["train", "ext-bi-gru"]));
    assert_eq!(ckpt, fs::read(out.join("models/ext-bi-gru.ckpt")).unwrap());

    let report = ok(oilcast(&config, &out, &["report"]));
    let record: EvaluationRecord = json(&out.join("evaluations/ext-bi-gru.json"));
    let plot = fs::read_to_string(out.join("plot_ext-bi-gru.csv")).unwrap();
    assert_eq!(plot.lines().count(), record.anchor_dates.len() + 1);
    let bench = fs::read_to_string(out.join("benchmarks.csv")).unwrap();
    assert_eq!(bench.lines().count(), 2);
    assert!(String::from_utf8_lossy(&report.stdout).contains("ext-bi-gru"));

    let manifest: RunManifest = json(&out.join(MANIFEST_FILE));
    for stage in manifest.stages.values() {
        for f in &stage.files {
            assert!(out.join(f).exists(), "manifest lists missing {f}");
        }
    }
    assert!(manifest.stages.contains_key("train:ext-bi-gru"));
}

#[test]
fn weights_override_reproduces_scenario_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_synthetic_experiment(tmp.path(), 360, 2);
    let out = tmp.path().join("out");
    ok(oilcast(&config, &out, &["prepare"]));
    ok(oilcast(&config, &out, &["ensemble"]));
    let searched: WeightsFile = json(&out.join("weights.json"));
    assert_eq!(searched.evaluations, 9 * 9 * 9);

    fs::write(
        tmp.path().join("w.json"),
        r#"{"w1": 0.0, "w2": 0.0, "w3": 1.0}"#,
    )
    .unwrap();
    ok(oilcast(
        &config,
        &out,
        &[
            "ensemble",
            "--weights",
            tmp.path().join("w.json").to_str().unwrap(),
        ],
    ));
    let m: Value = json(&out.join("ensemble_metrics.json"));
    assert_eq!(m["test"]["fused"], m["test"]["scenarios"][0]);
    let overridden: WeightsFile = json(&out.join("weights.json"));
    assert_eq!(overridden.evaluations, 0);
}

#[test]
fn exit_statuses() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_synthetic_experiment(tmp.path(), 360, 3);
    let out = tmp.path().join("out");

    let missing = oilcast(&config, &out, &["train", "gru"]);
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(oilcast(&config, &out, &["report"]).status.code(), Some(3));

    let bad = oilcast(&config, &out, &["train", "tri-gru"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("sent-bi-gru"));

    fs::remove_file(tmp.path().join("data/usdx.csv")).unwrap();
    let gone = oilcast(&config, &out, &["prepare"]);
    assert_eq!(gone.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&gone.stderr).contains("usdx.csv"));
}

#[test]
fn impossible_threshold_warns_and_selects_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_synthetic_experiment(tmp.path(), 360, 4);
    let out = tmp.path().join("out");
    ok(oilcast(&config, &out, &["prepare"]));
    let run = ok(oilcast(&config, &out, &["--threshold", "1.1", "select"]));
    assert!(String::from_utf8_lossy(&run.stderr).contains("warning"));
    let sel: Selection = json(&out.join("selection.json"));
    assert!(sel.selected.is_empty());
    assert_eq!(sel.correlations.len(), 3);
}

#[test]
fn output_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_synthetic_experiment(tmp.path(), 360, 5);
    let out = tmp.path().join("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_oilcast"))
        .args(["--config", config.to_str().unwrap(), "prepare"])
        .env("OILCAST_OUT", &out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("prepared.csv").exists());
}
