use std::fs;

use hallmhd::mms::Variable;
use hallmhd::runner::{execute, RunConfig};

fn structure_config(dir: &std::path::Path) -> RunConfig {
    RunConfig::parse(
        r#"{"scenario": "structure_preservation", "elements": 2, "degree": 1,
            "params": {"dt": 0.1, "t_final": 0.3}}"#,
        &[format!("output.dir={}", dir.display())],
    )
    .unwrap()
}

#[test]
fn identical_configs_give_identical_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    execute(&structure_config(&a)).unwrap();
    execute(&structure_config(&b)).unwrap();
    let first = fs::read(a.join("diagnostics.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("diagnostics.csv")).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 4);
}

#[test]
fn temporal_sweep_writes_one_error_row_per_step_and_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse(
        r#"{"scenario": "temporal_convergence", "elements": 2, "degree": 1,
            "sweep_dts": [0.5, 0.25], "params": {"t_final": 0.5}}"#,
        &[format!("output.dir={}", tmp.path().display())],
    )
    .unwrap();
    let summary = execute(&cfg).unwrap();
    assert_eq!(summary.reports.len(), 2);
    let text = fs::read_to_string(tmp.path().join("errors.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "degree,elements,dt,iterations,variable,error");
    assert_eq!(lines.count(), 2 * Variable::ALL.len());
    assert!(tmp.path().join("orders.csv").exists());
    assert!(tmp.path().join("schema.json").exists());
}

#[test]
fn uncreatable_output_directory_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain_file");
    fs::write(&file, "x").unwrap();
    let cfg = structure_config(&file.join("sub"));
    assert!(execute(&cfg).is_err());
}
