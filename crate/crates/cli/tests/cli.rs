use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lagns(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagns"))
        .args(args)
        .current_dir(dir)
        .env("LAGNS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().expect("stderr line")).unwrap()
}

const IDENTITY: &str = "kind = \"identity-suite\"\nseed = 4\n[grid]\nN = 32\n[data]\ncount = 3\n";

const GLOBAL: &str = "kind = \"global-small\"\n[grid]\nN = 32\n[time]\ndt = 0.0625\nsteps = 8\n";

#[test]
fn identity_suite_passes_and_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "id.toml", IDENTITY);
    let out = lagns(&["run", &cfg, "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&tmp.path().join("run/manifest.json"));
    assert_eq!(m["tool"], "lagns");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["kind"], "identity-suite");
    let files = m["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["path"] == "norms.csv"));
    for f in files {
        let bytes = fs::read(tmp.path().join("run").join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
    let norms = fs::read_to_string(tmp.path().join("run/norms.csv")).unwrap();
    assert!(norms.starts_with("step,time,quantity,value\n"));
    assert_eq!(norms.matches("step,time").count(), 1);
    let report = json(&tmp.path().join("run/report.json"));
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn bad_resolution_is_a_validation_error_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "kind = \"identity-suite\"\n[grid]\nN = 12\n");
    let out = lagns(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let e = stderr_json(&out);
    assert_eq!(e["key"], "grid.N");
    assert_eq!(e["class"], "validation");
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "kind = \"identity-suite\"\n[grid]\nN = 32\nfoo = 1\n");
    assert_eq!(lagns(&["run", &cfg], tmp.path()).status.code(), Some(2));
}

#[test]
fn oversized_data_is_refused_with_margins() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "big.toml",
        "kind = \"global-small\"\n[grid]\nN = 16\n[time]\ndt = 0.0625\nsteps = 4\n[data]\nu0_norm = 0.5\n",
    );
    let out = lagns(&["run", &cfg, "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "SmallnessViolated");
    let report = json(&tmp.path().join("run/report.json"));
    let u0 = &report["smallness"]["u0"];
    assert_eq!(u0["ok"], false);
    assert!(u0["measured"].as_f64().unwrap() > u0["limit"].as_f64().unwrap());
    let m = json(&tmp.path().join("run/manifest.json"));
    assert_eq!(m["exit_code"], 3);
    assert_eq!(m["status"], "smallness");
}

#[test]
fn global_run_is_bit_reproducible_and_compares_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.toml", GLOBAL);
    for d in ["a", "b"] {
        assert_eq!(lagns(&["run", &cfg, "--out", d], tmp.path()).status.code(), Some(0));
    }
    let (a, b) = (json(&tmp.path().join("a/manifest.json")), json(&tmp.path().join("b/manifest.json")));
    assert_eq!(a["files"], b["files"]);
    let out = lagns(&["compare", "a", "b"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let c: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(c["compared_rows"].as_u64().unwrap() > 0);
    assert_eq!(c["differing"].as_array().unwrap().len(), 0);
    assert!(c["stability_ratio"].is_null());
}

#[test]
fn manifest_reruns_its_own_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "id.toml", IDENTITY);
    assert_eq!(lagns(&["run", &cfg, "--out", "a"], tmp.path()).status.code(), Some(0));
    assert_eq!(lagns(&["run", "a/manifest.json", "--out", "b"], tmp.path()).status.code(), Some(0));
    let (a, b) = (json(&tmp.path().join("a/manifest.json")), json(&tmp.path().join("b/manifest.json")));
    assert_eq!(a["files"], b["files"]);
}

#[test]
fn multiplier_seed_only_moves_the_multiplier_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "kind = \"besov-suite\"\n[grid]\nN = 32\n[tolerance]\nmultiplier_trials = 4\n";
    let a = write(tmp.path(), "a.toml", base);
    let b = write(tmp.path(), "b.toml", &format!("{base}multiplier_seed = 9\n"));
    assert_eq!(lagns(&["run", &a, "--out", "a"], tmp.path()).status.code(), Some(0));
    assert_eq!(lagns(&["run", &b, "--out", "b"], tmp.path()).status.code(), Some(0));
    let out = lagns(&["compare", "a", "b"], tmp.path());
    let c: Value = serde_json::from_slice(&out.stdout).unwrap();
    let differing: Vec<&str> =
        c["differing"].as_array().unwrap().iter().map(|d| d["quantity"].as_str().unwrap()).collect();
    assert_eq!(differing, ["multiplier_bound"]);
}

#[test]
fn perturbed_pair_reports_a_stability_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.toml", GLOBAL);
    let b = write(tmp.path(), "b.toml", &format!("{GLOBAL}[data]\nperturbation = 0.01\n"));
    assert_eq!(lagns(&["run", &a, "--out", "a"], tmp.path()).status.code(), Some(0));
    assert_eq!(lagns(&["run", &b, "--out", "b"], tmp.path()).status.code(), Some(0));
    let c: Value = serde_json::from_slice(&lagns(&["compare", "a", "b"], tmp.path()).stdout).unwrap();
    let r = c["stability_ratio"].as_f64().unwrap();
    // Viscous decay only shrinks the difference.
    assert!(r > 0.0 && r < 1.0, "{r}");
}

#[test]
fn compare_without_manifest_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = lagns(&["compare", "empty", "empty"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "MissingManifest");
}

#[test]
fn unknown_suite_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lagns(&["suite", "nope", "--out", "s"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "UnknownSuite");
}

#[test]
fn smoke_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lagns(&["suite", "smoke", "--out", "s", "--jobs", "2"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = json(&tmp.path().join("s/summary.json"));
    assert_eq!(s["members"].as_array().unwrap().len(), 4);
}

#[test]
fn bad_thread_count_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lagns"))
        .args(["suite", "smoke"])
        .current_dir(tmp.path())
        .env("LAGNS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["key"], "LAGNS_THREADS");
}
