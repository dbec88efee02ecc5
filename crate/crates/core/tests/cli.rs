use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn remote_track(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_remote-track"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, edit: impl Fn(String) -> String) -> String {
    let base = remote_track::ScenarioConfig::builtin_text("scenario1").unwrap();
    let path = dir.join("cfg.toml");
    fs::write(&path, edit(base.to_string())).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = remote_track(&["run", "--config", "builtin:scenario1", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let golden = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/trajectory_header.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), golden.trim_end());
    assert!(csv.lines().count() > 30_000);

    let frames = fs::read_to_string(dir.path().join("frames.log")).unwrap();
    assert_eq!(frames.lines().next(), Some("k=0 bits=c0"));
    assert_eq!(frames.lines().count(), 201);

    let metrics: toml::Value = fs::read_to_string(dir.path().join("metrics.toml")).unwrap().parse().unwrap();
    assert_eq!(metrics["rate_condition"].as_bool(), Some(true));
    assert!(metrics["expansion"].as_float().unwrap() > 1.0);
    assert!(metrics["tracking_tail"].as_float().unwrap() <= 0.05);
    assert!(metrics["decoder_tail"].as_float().unwrap() <= 0.02);
}

#[test]
fn forced_expansion_reports_rate_condition_false() {
    let dir = tempfile::tempdir().unwrap();
    // the zoom grows when the condition fails, so keep the run short
    let cfg = write_config(dir.path(), |s| {
        s.replace("period = 0.15", "period = 0.15\nexpansion = 1.5")
            .replace("t_end = 30.0", "t_end = 2.0")
            .replace("t_tail = 25.0", "t_tail = 1.0")
    });
    let out = dir.path().join("out");
    let o = remote_track(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: toml::Value = fs::read_to_string(out.join("metrics.toml")).unwrap().parse().unwrap();
    assert_eq!(metrics["rate_condition"].as_bool(), Some(false));
    assert_eq!(metrics["expansion"].as_float(), Some(1.5));
}

#[test]
fn missing_period_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |s| s.replace("period = 0.15\n", ""));
    let o = remote_track(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("period"));
}

#[test]
fn unstable_step_is_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |s| {
        s.replace("gain = 8.0", "gain = 500.0").replace("step = 0.001", "step = 0.01")
    });
    let o = remote_track(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = remote_track(&["sweep", "--config", "builtin:scenario1", "--grid", "k=4,8", "--out", out, "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("4,") && rows[1].ends_with(",true,"));
    assert!(rows[2].starts_with("8,") && rows[2].ends_with(",true,"));
}

#[test]
fn bad_grid_key_is_config_error() {
    let o = remote_track(&["sweep", "--config", "builtin:scenario1", "--grid", "q=1"]);
    assert_eq!(o.status.code(), Some(1));
}
