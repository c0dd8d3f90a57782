use std::path::{Path, PathBuf};
use std::process::Command;

use exitlab::harness::cli::{manifest_path, run_cli};

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["exitlab"];
    argv.extend_from_slice(args);
    run_cli(argv)
}

const HALFPLANE: &str = r#"{"entry": {"id": "halfplane"}, "t_grid": [0.5, 1, 2, 4, 8, 10]}"#;

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "halfplane.json", HALFPLANE);
    let out = dir.path().join("r.csv");
    let args = ["verify-long-stay", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()];
    assert_eq!(run(&args), 0);
    let first = std::fs::read(&out).unwrap();
    assert_eq!(run(&args), 0);
    assert_eq!(first, std::fs::read(&out).unwrap());
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["subcommand"], "verify-long-stay");
    assert_eq!(manifest["passed"], true);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["config"]["entry"]["id"], "halfplane");
}

#[test]
fn sampling_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "sim.json",
        r#"{"domain": {"type": "ball", "center": [0, 0], "radius": 1}, "sampler": {"kind": "em", "dt": 0.001}, "count": 3000}"#,
    );
    let mut bodies = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("sim{threads}.csv"));
        let code = run(&["simulate", "--config", cfg.to_str().unwrap(), "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        bodies.push(std::fs::read_to_string(&out).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    assert!(bodies[0].starts_with("index,exit_time,exit_x,exit_y\n"));
    assert_eq!(bodies[0].lines().count(), 3001);
}

#[test]
fn malformed_json_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "bad.json", r#"{"entry": {"id": "halfplane"}, "t_grid": [1, 2"#);
    let out = dir.path().join("r.csv");
    assert_eq!(run(&["verify-long-stay", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert!(!out.exists());
    assert!(!manifest_path(&out).exists());
}

#[test]
fn strict_schema_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let extra = config(dir.path(), "extra.json", r#"{"entry": {"id": "halfplane"}, "t_grid": [1], "tgrid": [2]}"#);
    assert_eq!(run(&["verify-long-stay", "--config", extra.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["verify-long-stay", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert_eq!(run(&["verify-long-stay", "--out", out.to_str().unwrap()]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert!(!out.exists());
}

#[test]
fn rejected_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let disk = config(dir.path(), "disk.json", r#"{"entry": {"id": "disk"}, "t_grid": [1, 2]}"#);
    let out = dir.path().join("r.csv");
    assert_eq!(run(&["verify-long-stay", "--config", disk.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert!(!out.exists());
}

#[test]
fn failed_verdict_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // a decade of t gives about 3x growth for exponents 1 and 1/2
    let cfg = config(
        dir.path(),
        "hardy.json",
        r#"{"u": {"id": "sector", "angle": 1.5707963267948966}, "w": {"id": "halfplane"}, "samples": 20000}"#,
    );
    let out = dir.path().join("h.csv");
    assert_eq!(run(&["verify-hardy", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(manifest["passed"], false);
    let growth = manifest["verdicts"].as_array().unwrap().iter().find(|v| v["name"] == "ratio-growth").unwrap();
    assert_eq!(growth["passed"], false);
    assert_eq!(growth["tolerance"], 5.0);
}

#[test]
fn dump_tables_has_bessel_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tables.json");
    assert_eq!(run(&["dump-tables", "--out", out.to_str().unwrap()]), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let zeros = v["bessel"]["j0"]["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 64);
    assert!((zeros[0].as_f64().unwrap() - 2.404826).abs() < 1e-6);
    let half = v["bessel"]["j_half"]["zeros"].as_array().unwrap();
    assert!((half[0].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn pde_capacity_lambda_and_tails() {
    let dir = tempfile::tempdir().unwrap();
    let pde = config(
        dir.path(),
        "pde.json",
        r#"{"domain": {"type": "ball", "center": [0, 0], "radius": 1}, "t_grid": {"lo": 0.1, "hi": 2, "points": 5}, "h": 0.01}"#,
    );
    let out = dir.path().join("pde.csv");
    assert_eq!(run(&["pde", "--config", pde.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,cdf,survival,truncation_flux,truncation_bound,error_estimate\n"));
    assert_eq!(text.lines().count(), 6);

    let cap = config(
        dir.path(),
        "cap.json",
        r#"{"compact": {"type": "closed_ball", "center": [0, 0], "radius": 1}, "domain": {"type": "ball", "center": [0, 0], "radius": 2.718281828459045}, "methods": ["energy", "equilibrium"], "points": 200}"#,
    );
    let out = dir.path().join("cap.csv");
    assert_eq!(run(&["capacity", "--config", cap.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let mut rows = csv::Reader::from_path(&out).unwrap();
    let recs: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(&recs[0][0], "logarithmic");
    assert!((recs[0][1].parse::<f64>().unwrap() - 1.0).abs() < 0.01);
    assert_eq!(&recs[1][0], "condenser-equilibrium");
    assert!((recs[1][1].parse::<f64>().unwrap() - std::f64::consts::PI).abs() < 0.07);

    let lam = config(
        dir.path(),
        "lam.json",
        r#"{"domain": {"type": "strip", "halfwidth": 0.7853981633974483}, "h": 0.01, "fit": {"window": [1, 4]}}"#,
    );
    let out = dir.path().join("lam.csv");
    assert_eq!(run(&["lambda", "--config", lam.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("method,lambda,std_err,residual\n"));
    assert_eq!(text.lines().count(), 3);

    let tails = config(
        dir.path(),
        "tails.json",
        r#"{"domain": {"type": "schlicht", "entry": {"id": "halfplane"}}, "count": 20000, "window": [3, 30]}"#,
    );
    let out = dir.path().join("tails.csv");
    assert_eq!(run(&["tails", "--config", tails.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(manifest_path(&out)).unwrap()).unwrap();
    let h: f64 = manifest["provenance"]["exponent"].as_str().unwrap().parse().unwrap();
    assert!((h - 0.5).abs() < 0.05, "{h}");
}

#[test]
fn binary_reports_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = config(dir.path(), "bad.json", "{");
    let status = Command::new(env!("CARGO_BIN_EXE_exitlab"))
        .args(["verify-lemma1", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_exitlab")).args(["dump-tables"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["bessel"]["j0"]["zeros"].as_array().unwrap().len(), 64);
}
