use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn heattrace(config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_heattrace"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("out/manifest.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn record<'a>(records: &'a [Value], kind: &str) -> &'a Value {
    records
        .iter()
        .find(|r| r["record"] == kind)
        .unwrap_or_else(|| panic!("no {kind} record"))
}

#[test]
fn kernel_check_on_the_half_line_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = heattrace(
        "command = \"kernel-check\"\nseed = 3\ndomain = { kind = \"half_space\", dim = 1 }\n",
        dir.path(),
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(dir.path());
    assert!(m.iter().all(|r| r["schema_version"] == 1));
    assert_eq!(record(&m, "summary")["data"]["ok"], true);
    record(&m, "versions");
    record(&m, "timing");
    let rows = fs::read_to_string(dir.path().join("out/kernel_check.csv")).unwrap();
    assert!(rows.lines().next().unwrap().contains("residual"));
    assert!(rows.lines().skip(1).all(|l| l.ends_with("true")));
}

#[test]
fn zero_data_solve_converges_trivially() {
    let dir = tempfile::tempdir().unwrap();
    let out = heattrace(
        "command = \"solve\"\np = 3.0\nhorizon = 0.5\ndomain = { kind = \"half_space\", dim = 1 }\n[measure.spec]\n",
        dir.path(),
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(dir.path());
    let summary = &record(&m, "summary")["data"];
    assert_eq!(summary["ok"], true);
    assert!(summary["message"]
        .as_str()
        .unwrap()
        .contains("Converged after 1 iterations"));
    assert!(dir.path().join("out/solve_field.csv").exists());
}

#[test]
fn subcritical_condition_on_a_bounded_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
command = "criteria"
p = 3.0
horizon = 1.0
domain = { kind = "half_space", dim = 1 }

[measure.spec.interior]
weight = "lebesgue"
density = { kind = "bump", center = [1.0], radius = 0.5, height = 1.0 }

[[criteria.checks]]
check = "subcritical"
"#;
    let out = heattrace(cfg, dir.path(), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(dir.path().join("out/criteria_summary.csv")).unwrap();
    let row = summary.lines().find(|l| l.contains(",cond_1_16,")).unwrap();
    assert!(row.contains(",consistent,"), "{row}");
}

#[test]
fn command_flag_overrides_the_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = heattrace(
        "command = \"solve\"\nseed = 3\ndomain = { kind = \"interval\", length = 1.0 }\n",
        dir.path(),
        &["--command", "kernel-check"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("out/kernel_check.csv").exists());
}

#[test]
fn invalid_configurations_list_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = heattrace(
        "command = \"solve\"\np = 0.5\ndomain = { kind = \"half_space\", dim = 5 }\n",
        dir.path(),
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p ") || err.contains("p:"), "{err}");
    assert!(err.contains("horizon"), "{err}");
    assert!(err.contains("dimension"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = heattrace("command = \"solve\"\nhorizn = 1.0\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizn"));
}

#[test]
fn repeated_runs_write_identical_tables() {
    let cfg = "command = \"solve\"\np = 2.0\nhorizon = 0.1\ndomain = { kind = \"half_space\", dim = 1 }\n[measure.spec]\natoms = [{ point = [1.0], mass = 0.5 }]\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(heattrace(cfg, a.path(), &[]).status.success());
    assert!(heattrace(cfg, b.path(), &[]).status.success());
    for name in ["solve_field.csv", "solve_history.csv"] {
        assert_eq!(
            fs::read(a.path().join("out").join(name)).unwrap(),
            fs::read(b.path().join("out").join(name)).unwrap()
        );
    }
}
