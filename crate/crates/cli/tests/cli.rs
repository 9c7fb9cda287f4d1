use std::path::Path;
use std::process::{Command, Output};

fn fibair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fibair")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const TINY: &str = r#"
name = "cli-tiny"
[link]
num_spans = 1
span_length_km = 50.0
[receivers]
enabled = ["dbp-iidg", "dbp-cg"]
min_training_count = 5
[run]
symbols_per_run = 256
mc_runs = 2
training_runs = 10
[sweep]
power_dbm = [0.0]
"#;

#[test]
fn run_then_report_reproduces_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let first = fibair(&["run", &cfg, "--output", out_s]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let table = std::fs::read_to_string(out.join("results.tsv")).unwrap();
    assert!(table.starts_with("# fibair "));
    assert!(table.contains("# config_hash: "));
    assert!(table.contains("# master_seed: 1"));
    assert!(String::from_utf8_lossy(&first.stdout).contains("1 computed"));

    let again = fibair(&["run", &cfg, "--output", out_s]);
    assert_eq!(again.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&again.stdout).contains("0 computed, 1 reused"));

    let rep = fibair(&["report", &cfg, "--output", out_s]);
    assert_eq!(rep.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out.join("results.tsv")).unwrap(), table);
}

#[test]
fn seed_and_receiver_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let r = fibair(&["run", &cfg, "--output", out.to_str().unwrap(), "--seed", "9", "--receivers", "dbp-cg"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let table = std::fs::read_to_string(out.join("results.tsv")).unwrap();
    assert!(table.contains("# master_seed: 9"));
    assert!(table.contains("dbp-cg_air") && !table.contains("dbp-iidg_air"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[link]\nnum_spanz = 3\n");
    let r = fibair(&["run", &bad]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));

    let missing = dir.path().join("nope.toml");
    assert_eq!(fibair(&["run", missing.to_str().unwrap()]).status.code(), Some(2));

    let cfg = write_config(dir.path(), TINY);
    assert_eq!(fibair(&["run", &cfg, "--receivers", "dbp-magic"]).status.code(), Some(2));
}

#[test]
fn failed_or_missing_points_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let starved = TINY.replace("min_training_count = 5", "min_training_count = 1000");
    let cfg = write_config(dir.path(), &starved);
    let out = dir.path().join("out");
    let r = fibair(&["run", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("FAILED"));

    // nothing simulated yet for the desk preset of the same config
    let fresh = dir.path().join("fresh");
    let r = fibair(&["report", &cfg, "--desk", "--output", fresh.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stdout).contains("1 missing"));
}

#[test]
fn selftest_passes() {
    let r = fibair(&["selftest"]);
    let text = String::from_utf8_lossy(&r.stdout);
    assert_eq!(r.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 6);
}
