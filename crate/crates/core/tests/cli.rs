//! End-to-end tests of the `vortex` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use vortex_core::cli::{load_report, RunConfig, REPORT_CSV, REPORT_JSON, TRACE_JSONL};

const LAKE: &str = r#"{
    "scenario": {
        "kind": "lake",
        "depth": { "kind": "gaussian", "base": 1.0, "amplitude": 1.0, "center": [0.3, 0.2], "width": 1.0 },
        "kappa": 6.283185307179586
    },
    "epsilons": [0.5],
    "resolution": [16, 16]
}"#;

fn vortex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortex")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn with_epsilons(eps: &str) -> String {
    LAKE.replace(r#""epsilons": [0.5]"#, &format!(r#""epsilons": {eps}"#))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn minimal_lake_run_writes_one_row() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lake.json", LAKE);
    let out = tmp.path().join("out");
    let o = vortex(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in [REPORT_JSON, REPORT_CSV, TRACE_JSONL, "field_eps_0.5.csv"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let report = load_report(&out).unwrap();
    assert_eq!(report.report.rows.len(), 1);
    assert!(report.failures.is_empty());
    let csv = fs::read_to_string(out.join(REPORT_CSV)).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let field = fs::read_to_string(out.join("field_eps_0.5.csv")).unwrap();
    assert_eq!(field.lines().next(), Some("x1,x2,u,psi,vorticity"));
    assert_eq!(field.lines().count(), 1 + 17 * 17);
    assert!(stdout(&o).contains("insufficient points"));
}

#[test]
fn increasing_epsilons_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", &with_epsilons("[0.2, 0.3]"));
    let out = tmp.path().join("out");
    let o = vortex(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("epsilons"), "{}", stderr(&o));
    assert!(!out.exists());
    assert!(RunConfig::from_json(&with_epsilons("[0.2, 0.2]")).is_err());
    assert!(RunConfig::from_json(&with_epsilons("[]")).is_err());
    assert!(RunConfig::from_json(&with_epsilons("[1.5]")).is_err());
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lake.json", LAKE);
    // a regular file where the parent directory should be
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("out");
    let o = vortex(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let mut names: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["blocker", "lake.json"]);
}

#[test]
fn non_empty_output_is_refused() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lake.json", LAKE);
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let o = vortex(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_dir(&out).unwrap().count(), 1);
}

#[test]
fn report_on_empty_directory_fails() {
    let tmp = TempDir::new().unwrap();
    let o = vortex(&["report", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(REPORT_JSON));
}

#[test]
fn run_then_report_reproduces_the_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lake.json", &with_epsilons("[0.5, 0.4]"));
    let out = tmp.path().join("out");
    let run = vortex(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    assert!(stdout(&run).contains("diameter slope: insufficient points"));
    let report = vortex(&["report", out.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));
    assert_eq!(stdout(&run), stdout(&report));
    assert_eq!(load_report(&out).unwrap().report.rows.len(), 2);
    let quiet = vortex(&["report", out.to_str().unwrap(), "--quiet"]);
    assert!(quiet.stdout.is_empty());
}

#[test]
fn corrupted_gradient_fails_the_check() {
    let tmp = TempDir::new().unwrap();
    let good = write_config(tmp.path(), "good.json", LAKE);
    let o = vortex(&["check", &good]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let corrupt = LAKE.replacen('{', r#"{ "test_hooks": { "corrupt_gradient": true },"#, 1);
    let bad = write_config(tmp.path(), "bad.json", &corrupt);
    let o = vortex(&["check", &bad]);
    assert_ne!(o.status.code(), Some(0));
    let gradient = stdout(&o).lines().find(|l| l.starts_with("gradient")).unwrap().to_owned();
    assert!(gradient.contains("FAIL"), "{gradient}");
}

#[test]
fn check_verdicts_do_not_depend_on_the_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lake.json", LAKE);
    let verdicts = |seed: &str| -> Vec<(String, String)> {
        let o = vortex(&["check", &cfg, "--seed", seed]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        stdout(&o)
            .lines()
            .map(|l| (l[..12].trim_end().to_owned(), l[13..17].to_owned()))
            .collect()
    };
    let first = verdicts("1");
    assert_eq!(first.len(), 5);
    assert_eq!(verdicts("2"), first);
    assert_eq!(verdicts("3"), first);
}

#[test]
fn malformed_config_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "broken.json", "{ not json");
    assert_eq!(vortex(&["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(vortex(&["check", &cfg]).status.code(), Some(1));
    let missing = tmp.path().join("missing.json");
    assert_eq!(vortex(&["check", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 3);
}
