use std::fs;
use std::process::Command;

fn hallmhd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hallmhd"))
}

#[test]
fn run_writes_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"scenario": "structure_preservation", "elements": 2, "degree": 1}"#).unwrap();
    let out = tmp.path().join("out");
    let status = hallmhd()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--set", "params.dt=0.1", "--set", "params.t_final=0.2"])
        .arg("--set")
        .arg(format!("output.dir={}", out.display()))
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("config.resolved.json").exists());
}

#[test]
fn bad_config_fails_with_the_offending_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, "{}").unwrap();
    let res = hallmhd().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("scenario"));
}

#[test]
fn sweep_rejects_a_single_run_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"scenario": "structure_preservation"}"#).unwrap();
    let res = hallmhd().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert!(!res.status.success());
}
