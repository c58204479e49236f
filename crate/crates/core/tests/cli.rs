//! Exit codes and outputs of the `target-lab` binary.

use std::path::Path;
use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_target-lab"))
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn validate_writes_csv_and_summary() {
    let out = tempfile::tempdir().unwrap();
    let run = lab()
        .args(["validate", "--config", &config("validate_zero.toml"), "--seed", "5", "--workers", "2"])
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&run.stdout).contains("violations = 0"));
    assert!(out.path().join("violations.csv").exists());
    let summary = std::fs::read_to_string(out.path().join("summary.txt")).unwrap();
    assert!(summary.contains("seed = 5"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = lab().arg("validate").output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "problem = [unterminated").unwrap();
    let parse = lab().arg("tree").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(parse.status.code(), Some(2));

    let no_section = lab()
        .args(["tree", "--config", &config("validate_zero.toml")])
        .arg("--out")
        .arg(dir.path().join("tree"))
        .output()
        .unwrap();
    assert_eq!(no_section.status.code(), Some(3));

    let cfl = lab()
        .args(["solve", "--config", &config("solve_cfl_violation.toml")])
        .arg("--out")
        .arg(dir.path().join("cfl"))
        .output()
        .unwrap();
    assert_eq!(cfl.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&cfl.stderr).contains("CFL"));
}
