use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loopspam"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn full(config: &str, out: &Path) -> Output {
    let cfg = configs().join(config);
    run(&["full", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

#[test]
fn example_configs_follow_the_exit_code_contract() {
    let expected = [
        ("null.toml", 0),
        ("mixed_source.toml", 0),
        ("explicit_angles.toml", 0),
        ("small_error.toml", 0),
        ("medium_error.toml", 2),
        ("large_error.toml", 2),
        ("two_errors.toml", 2),
    ];
    for (name, want) in expected {
        let dir = tempfile::tempdir().unwrap();
        let out = full(name, dir.path());
        assert_eq!(code(&out), want, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join("report.json").exists());
    }
}

#[test]
fn null_run_reports_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let out = full("null.toml", dir.path());
    assert_eq!(code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "loopspam-report/1");
    assert_eq!(report["detection"]["detected"], false);
    let fids = report["reconstruction"]["score"]["state_fidelities"].as_array().unwrap();
    assert_eq!(fids.len(), 4);
    assert!(fids.iter().all(|f| f.as_f64().unwrap() > 0.99));
    assert!(report["wall_clock_ms"].is_null());
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(code(&run(&["analyze", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["full", "--scheme", "3n"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "shots = 0\n").unwrap();
    let out = run(&["full", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("shots"));
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn missing_data_file_exits_one_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "analyze",
        "--data",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(text.contains("nope.csv"));
}

#[test]
fn simulate_then_analyze_saved_data() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = run(&["simulate", "--scheme", "2n", "--seed", "9", "--out", sim.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let data = sim.join("measurements.csv");
    assert!(data.exists());
    let ana = dir.path().join("ana");
    let out = run(&[
        "analyze",
        "--scheme",
        "2n",
        "--data",
        data.to_str().unwrap(),
        "--out",
        ana.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(ana.join("delta_significance.csv").exists());
    assert!(!ana.join("measurements.csv").exists());
}

#[test]
fn flags_override_config_and_threshold_matters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("small_error.toml");
    // a tiny threshold flags sampling noise
    let out = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--threshold",
        "0.01",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["detection_threshold"], 0.01);
    assert_eq!(report["config"]["mode"], "analyze");
}

#[test]
fn repeated_runs_write_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "full".to_string(),
            "--scheme".into(),
            "n+1".into(),
            "--seed".into(),
            "42".into(),
            "--out".into(),
            d.to_str().unwrap().into(),
        ]
    };
    assert_eq!(code(&bin().args(args(a.path())).output().unwrap()), 0);
    assert_eq!(code(&bin().args(args(b.path())).output().unwrap()), 0);
    for file in ["measurements.csv", "delta_mean.csv", "delta_std.csv", "delta_significance.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
    // the echoed output directory differs, everything else must match
    let strip = |d: &Path| {
        std::fs::read_to_string(d.join("report.json"))
            .unwrap()
            .replace(d.to_str().unwrap(), "<out>")
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}
