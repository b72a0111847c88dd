use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpseries"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn unknown_subcommand_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["bogus"]).status.code(), Some(2));
}

#[test]
fn invalid_knobs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["series", "--epsilon", "2.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[run]\nnot_a_knob = 1\n").unwrap();
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "series"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn series_table_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["series"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# subcommand: series"));
    assert!(lines[1].starts_with("# config_hash: "));
    assert_eq!(lines[2], "# precision: double");
    assert_eq!(lines[3], "s,lambda,lambda_imag,residual");
    // Orders 0 through 10.
    assert_eq!(lines.len(), 4 + 11);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("series.json")).unwrap()).unwrap();
    assert_eq!(doc["report"]["lambdas"].as_array().unwrap().len(), 11);
    assert_eq!(
        doc["header"]["config_hash"].as_str().unwrap(),
        lines[1].trim_start_matches("# config_hash: ")
    );
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[instance]\nphase = 0.2\n\n[run]\norder = 4\n").unwrap();
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "series", "--order", "6"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("series.json")).unwrap()).unwrap();
    assert_eq!(doc["config"]["phase"], 0.2);
    assert_eq!(doc["config"]["order"], 6);
}

#[test]
fn identical_config_gives_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--threads", "2", "classes", "--order", "6"];
    assert!(run(a.path(), &args).status.success());
    assert!(run(b.path(), &args).status.success());
    for name in ["classes.csv", "classes.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn class_of_a_worked_string() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["classes", "--path", "(1234565654321)", "--levels", "3:1,6:1", "--safedist", "0,11"],
    );
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("translation (123(123(-1)321)321)"));
    assert!(text.contains("class of 4 members"));
    let other = tempfile::tempdir().unwrap();
    run(other.path(), &["classes", "--order", "8"]);
    let hash = |d: &Path| fs::read_to_string(d.join("classes.csv")).unwrap().lines().nth(1).unwrap().to_string();
    assert_ne!(hash(dir.path()), hash(other.path()));
}

#[test]
fn denominators_pass_with_bisected_beta() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["denominators", "--radius", "60"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("denominators.json")).unwrap()).unwrap();
    assert_eq!(doc["report"]["report"]["pass"], true);
    assert_eq!(doc["report"]["control"]["pass"], false);
}
