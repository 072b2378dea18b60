use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ehcoop::harness::load_report;

fn ehcoop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehcoop"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const TWC: &str =
    r#"{"model": "twc", "harvests": [[2, 5, 0, 0], [0, 4, 0, 7]], "transfer_efficiency": 0.5}"#;

#[test]
fn solve_writes_a_report_that_revalidates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "twc.json", TWC);
    let out = dir.path().join("report.json");
    let o = ehcoop(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--bits",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("bits"));
    let report = load_report(&out).unwrap();
    report.revalidate().unwrap();
    assert!(report.objective_nats > 0.0);
    assert!((report.objective_bits - report.objective_nats / std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn bad_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"model": "twc", "harvests": [[1], [1]], "transfer_efficiency": 1.2}"#,
    );
    let o = ehcoop(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("transfer_efficiency"));
    let o = ehcoop(&["solve", "--config", "/does/not/exist.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_passes_on_a_small_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mac.json",
        r#"{"model": "mac", "harvests": [[3, 0, 6], [0, 5, 0]], "transfer_efficiency": [0.6, 0.4],
            "battery_capacity": [4, 5]}"#,
    );
    let o = ehcoop(&["verify", "--config", &cfg, "--grid-points", "30"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("PASS oracle bound"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn baseline_trails_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "twc.json", TWC);
    let base = dir.path().join("base.json");
    let best = dir.path().join("best.json");
    assert!(ehcoop(&[
        "baseline",
        "--config",
        &cfg,
        "--kind",
        "const-coop",
        "--out",
        base.to_str().unwrap()
    ])
    .status
    .success());
    assert!(
        ehcoop(&["solve", "--config", &cfg, "--out", best.to_str().unwrap()])
            .status
            .success()
    );
    let base: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&base).unwrap()).unwrap();
    let best = load_report(&best).unwrap();
    assert!(base["objective_nats"].as_f64().unwrap() <= best.objective_nats);
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"base": {"model": "twc", "harvests": [[0, 0, 0, 0, 0], [0, 0, 0, 0, 0]], "transfer_efficiency": 0.5},
            "swept_parameter": "alpha1", "lo": 0, "hi": 0.5, "step": 0.25,
            "trials_per_point": 3, "seed": 5, "modes": ["bi", "none"], "peak_harvest_mj": [10, 10]}"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = ehcoop(&["sweep", "--config", &cfg, "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("swept_value,mode,mean_nats,mean_bits,trials,seed,nonconverged\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap())
            .unwrap();
    assert!(meta["rng"].as_str().unwrap().contains("ChaCha20"));
    assert_eq!(meta["spec"]["seed"], 5);
}
