use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qra(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qra"))
        .current_dir(dir)
        .env("QRA_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_writes_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = qra(dir.path(), &["--out", "g", "generate", "classical:n=12,M=1000,p1=0.5", "cue:n=6,M=100,mode=fixed"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read_json(&dir.path().join("g/manifest_generate.json"));
    let inputs = manifest["config"]["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert_eq!(inputs[1]["seeds"]["unitary_seed"], manifest["config"]["seed"]);
    let classical = inputs[0]["label"].as_str().unwrap();
    let text = std::fs::read_to_string(dir.path().join(format!("g/{classical}.txt"))).unwrap();
    assert_eq!(text.lines().count(), 1000);
    assert!(text.lines().all(|l| l.len() == 12 && l.bytes().all(|b| b == b'0' || b == b'1')));
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn generate_rejects_bad_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = qra(dir.path(), &["--out", "g", "generate", "classical:n=0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad generator spec"));
}

#[test]
fn report_single_input_has_empty_wasserstein() {
    let dir = tempfile::tempdir().unwrap();
    let out = qra(dir.path(), &["--out", "r", "report", "classical:n=12,M=2000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("r/report.json"));
    assert_eq!(report["schema"], 1);
    assert_eq!(report["wasserstein"], serde_json::json!({}));
    assert_eq!(report["nist"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("r/manifest_report.json").exists());
}

#[test]
fn report_two_inputs_has_distance_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = qra(dir.path(), &["--out", "r", "report", "classical:n=8,M=500,seed=1", "classical:n=8,M=500,p1=0.4,seed=2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("r/report.json"));
    let d = report["wasserstein"]["distances"].as_array().unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!(d[0].as_array().unwrap().len(), 2);
    assert_eq!(d[0][0], 0.0);
    assert!(d[0][1].as_f64().unwrap() > 0.0);
    assert_eq!(d[0][1], d[1][0]);
}

#[test]
fn report_corrupt_file_is_section_error_and_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.txt"), "0101\n01x1\n").unwrap();
    let out = qra(dir.path(), &["--out", "r", "report", "bad.txt", "classical:n=4,M=400"]);
    assert_eq!(out.status.code(), Some(1));
    let report = read_json(&dir.path().join("r/report.json"));
    assert!(report["inputs"][0]["error"]["message"].is_string());
    assert!(report["heatmap"][0]["error"].is_object());
    assert!(report["heatmap"][1]["error"].is_null());
    assert!(dir.path().join("r/manifest_report.json").exists());
}

#[test]
fn wide_input_density_is_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let out = qra(dir.path(), &["--out", "r", "report", "classical:n=40,M=400"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("r/report.json"));
    assert!(report["density"][0]["not_applicable"].is_string());
}

#[test]
fn single_commands_write_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let spec = "cue:n=6,M=3000,mode=fixed,seed=4";
    for (args, file) in [
        (vec!["heatmap", spec], "heatmap.csv"),
        (vec!["spectra", spec, "--count", "10"], "ginibre.csv"),
        (vec!["wishart", spec], "mp_curve.csv"),
        (vec!["density", spec], "density_curve.csv"),
        (vec!["nist", spec], "nist.txt"),
        (vec!["xeb", spec, "--unitary-seed", "4"], "xeb.csv"),
    ] {
        let sub = format!("o_{}", args[0]);
        let mut full = vec!["--out", sub.as_str()];
        full.extend(args.iter().copied());
        let out = qra(dir.path(), &full);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join(&sub).join(file).exists(), "{file}");
        assert!(dir.path().join(&sub).join(format!("manifest_{}.json", args[0])).exists());
    }
    let out = qra(dir.path(), &["--out", "j", "--format", "json", "xeb", spec, "--unitary-seed", "4"]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["fidelity"].as_f64().unwrap() > 0.5);
}

#[test]
fn xeb_reads_probability_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = ["0.25"; 4].join("\n");
    std::fs::write(dir.path().join("p.csv"), format!("p\n{p}\n")).unwrap();
    std::fs::write(dir.path().join("s.txt"), "00\n01\n10\n11\n").unwrap();
    let out = qra(dir.path(), &["--out", "x", "xeb", "s.txt", "--probs", "p.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["fidelity"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--out", "r", "report", "classical:n=8,M=800", "cue:n=8,M=800"];
    assert!(qra(dir.path(), &args).status.success());
    let first = std::fs::read(dir.path().join("r/manifest_report.json")).unwrap();
    assert!(qra(dir.path(), &args).status.success());
    let second = std::fs::read(dir.path().join("r/manifest_report.json")).unwrap();
    assert_eq!(first, second);
}
