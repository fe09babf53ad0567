use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blowup_core::lab::{ExperimentManifest, Report, REPORT_FILE};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_blowup-lab"));
    c.env_remove("BLOWUP_LAB_OUT").env("RUST_LOG", "error");
    c
}

fn manifests() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests")
}

fn write_manifest(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_report(dir: &Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(dir.join(REPORT_FILE)).unwrap()).unwrap()
}

#[test]
fn defaults_print_a_valid_manifest() {
    let o = bin().args(["pde", "--defaults"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let m = ExperimentManifest::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(m.command.name(), "pde");
    m.validate().unwrap();
}

#[test]
fn every_shipped_manifest_validates() {
    let mut seen = 0;
    for entry in std::fs::read_dir(manifests()).unwrap() {
        let path = entry.unwrap().path();
        let m = ExperimentManifest::load(&path).unwrap();
        let o = bin()
            .arg(m.command.name())
            .arg("--manifest")
            .arg(&path)
            .arg("--validate")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn validate_rejects_bad_manifests_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_manifest(
        tmp.path(),
        "bad.json",
        r#"{"command": "ode", "parameters": {"alpha": 2.5}}"#,
    );
    let o = bin()
        .args(["ode", "--validate", "--manifest"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error"));

    let unknown = write_manifest(
        tmp.path(),
        "unknown.json",
        r#"{"command": "ode", "parameters": {"alfa": 1}}"#,
    );
    let o = bin()
        .args(["ode", "--validate", "--manifest"])
        .arg(&unknown)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mismatched_command_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_manifest(tmp.path(), "c.json", r#"{"command": "criteria"}"#);
    let o = bin().args(["ode", "--manifest"]).arg(&m).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'criteria' manifest"));
}

#[test]
fn unknown_command_is_a_usage_error() {
    let o = bin().args(["sweep", "--defaults"]).output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn failed_checks_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = bin()
        .args(["example4", "--manifest"])
        .arg(manifests().join("example4_window_violation.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("FAILED construction"));
    let r = read_report(&out);
    assert!(!r.passed());
    assert!(!r.check("construction").unwrap().passed);
}

#[test]
fn criteria_run_writes_report_and_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let o = bin()
        .args(["criteria", "--manifest"])
        .arg(manifests().join("criteria_boundary.json"))
        .arg("--out")
        .arg(&first)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read_report(&first);
    assert!(report.passed());
    assert_eq!(report.files, vec!["criteria.csv".to_string()]);
    assert_eq!(report.manifest.output_dir.as_deref(), Some(first.as_path()));

    // the embedded manifest is complete: re-running it gives the same tables
    let mut again = report.manifest.clone();
    let second = tmp.path().join("second");
    again.output_dir = Some(second.clone());
    let path = write_manifest(tmp.path(), "again.json", &serde_json::to_string(&again).unwrap());
    let o = bin()
        .args(["criteria", "--jobs", "2", "--manifest"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for f in &report.files {
        assert_eq!(
            std::fs::read_to_string(first.join(f)).unwrap(),
            std::fs::read_to_string(second.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(read_report(&second).checks, report.checks);
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_manifest(tmp.path(), "m.json", r#"{"command": "example4"}"#);
    let out = tmp.path().join("env-out");
    let o = bin()
        .args(["example4", "--manifest"])
        .arg(&m)
        .env("BLOWUP_LAB_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_report(&out);
    assert!(r.passed());
    for f in &r.files {
        assert!(out.join(f).is_file(), "{f}");
    }
}
