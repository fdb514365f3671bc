use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn fdpkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdpkit")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = fdpkit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for path in [&a, &b] {
        ok(&["generate", "--family", "classical", "-n", "4", "-m", "6", "--seed", "7", "-o", p(path)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.model.json")).unwrap(),
        fs::read(dir.path().join("b.model.json")).unwrap()
    );
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn exit_codes() {
    assert_eq!(fdpkit(&["plan", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(fdpkit(&["--help"]).status.code(), Some(0));
    let missing = fdpkit(&["plan", "-i", "/nonexistent/instance.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"version\": 1}").unwrap();
    assert_eq!(fdpkit(&["eval", "-i", p(&bad)]).status.code(), Some(2));
}

#[test]
fn full_pipeline_composes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let data = dir.path().join("data");
    let learned = dir.path().join("learned.json");
    ok(&["generate", "--family", "binary", "-n", "3", "-m", "3", "--seed", "1", "-o", p(&inst)]);
    ok(&["simulate", "-i", p(&inst), "--num-configs", "3", "--per-config", "20000", "--seed", "2", "-o", p(&data)]);
    ok(&["learn", "-d", p(&data), "--method", "cf", "--family", "classical", "--smoothing", "-o", p(&learned)]);
    let plan = ok(&["plan", "-i", p(&inst), "--model", p(&learned), "--alg", "milp-bs", "--eps", "0.1"]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_fdpkit"))
        .args(["eval", "-i", p(&inst), "--plan", "-", "--against", p(&learned), "--test-configs", "200"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(plan.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let eval: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(eval["feasible"], true);
    let dist: f64 = eval["attack_distribution"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((dist - 1.0).abs() < 1e-12);
    assert!(eval["tv_error"].as_f64().unwrap() < 0.05);
}

#[test]
fn plan_is_within_certificate_of_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    ok(&["generate", "--family", "binary", "-n", "4", "-m", "3", "--seed", "5", "-o", p(&inst)]);
    let eps = 0.1;
    let bs: Value = serde_json::from_str(&ok(&["plan", "-i", p(&inst), "--alg", "milp-bs", "--eps", "0.1", "--eps-bs", "0.0001"])).unwrap();
    let brute: Value = serde_json::from_str(&ok(&["plan", "-i", p(&inst), "--alg", "brute"])).unwrap();
    let gap = bs["expected_loss"].as_f64().unwrap() - brute["expected_loss"].as_f64().unwrap();
    assert!(gap >= -1e-12 && gap <= 2.0 * eps * eps + 1e-4 + 1e-12, "{gap}");
}

#[test]
fn plan_writes_lp_file() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let lp = dir.path().join("model.lp");
    ok(&["generate", "--family", "binary", "-n", "2", "-m", "2", "--seed", "3", "-o", p(&inst)]);
    ok(&["plan", "-i", p(&inst), "--alg", "milp", "--eps", "0.2", "--dump-lp", p(&lp), "-o", p(&dir.path().join("plan.json"))]);
    let text = fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Minimize") && text.contains("Subject To"));
    assert!(text.trim_end().ends_with("End"));
}

#[test]
fn casestudy_reports_exact_losses() {
    let apt = ok(&["casestudy", "--profile", "apt"]);
    assert!(apt.contains("14/25") && apt.contains("13/40"));
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("botnet.json");
    ok(&["casestudy", "--profile", "botnet", "-o", p(&json)]);
    let botnet: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(botnet["before"]["loss_exact"], "1/5");
    assert_eq!(botnet["published"]["loss_exact"], "1/10");
}

#[test]
fn experiment_writes_table_trials_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("poison.csv");
    ok(&[
        "experiment", "poisoning", "-n", "3", "-m", "2", "--gammas", "0,0.01", "--reps", "3", "--per-config", "1000", "--seed", "4", "-o",
        p(&out),
    ]);
    let table = fs::read_to_string(&out).unwrap();
    assert!(table.starts_with("param,mean,std,n_reps\n"));
    assert_eq!(table.lines().count(), 3);
    assert!(dir.path().join("poison.trials.csv").exists());
    assert!(dir.path().join("poison.csv.manifest.json").exists());
}
