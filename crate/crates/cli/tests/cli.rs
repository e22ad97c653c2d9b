use std::fs;
use std::process::Command;

fn infoplan() -> Command {
    Command::new(env!("CARGO_BIN_EXE_infoplan"))
}

#[test]
fn small_grid_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = infoplan()
        .args(["--domain", "grid", "--n", "2", "--m", "1", "--f", "log", "--trials", "3", "--seed", "4"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 of 3 trials failed"));
    for f in ["aggregate.csv", "trace_0.jsonl", "trace_1.jsonl", "trace_2.jsonl"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"domain": "zones", "n": 2, "m": 1, "trials": 5}"#).unwrap();
    let out = infoplan()
        .arg("--config")
        .arg(&cfg)
        .args(["--trials", "1"])
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let agg = fs::read_to_string(dir.path().join("o/aggregate.csv")).unwrap();
    assert!(agg.lines().nth(1).unwrap().starts_with("zones,2,1,id,1,0,"));
}

#[test]
fn learn_mode_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 2, "beam_width": 4, "train": {"hidden": [8]}}"#).unwrap();
    let out = infoplan()
        .arg("--config")
        .arg(&cfg)
        .args(["--mode", "learn", "--trials", "2", "--episodes", "2"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert!(curve.starts_with("episode,mean_score,std_score,epsilon"));
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 2, "nosie_sigma": 0.1}"#).unwrap();
    let out = infoplan().arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosie_sigma"));
}

#[test]
fn failed_trials_give_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 1, "trials": 2, "weights": [1, 1, 1, 1, 1, 1, 1]}"#).unwrap();
    let out = infoplan()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 of 2 trials failed"));
}

#[test]
fn bad_flag_value_fails() {
    let out = infoplan().args(["--f", "cube"]).output().unwrap();
    assert!(!out.status.success());
}
