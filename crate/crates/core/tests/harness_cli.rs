use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::json;
use tempfile::TempDir;
use xorlab::harness::read_trials_csv;

fn xorlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xorlab"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: serde_json::Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn smoke_config(experiment: &str) -> serde_json::Value {
    json!({
        "experiment": experiment,
        "params": {"n": 100, "k": 3, "d": 2.5, "q": 2},
        "trials": 1,
        "seed": 7,
        "wp_mode": "exact",
        "scan": {"lo": 0.3, "hi": 1.5, "resolution": 0.05},
        "freeness": {"ell": 2},
        "kernel_samples": 10
    })
}

#[test]
fn missing_config_exits_with_config_error() {
    let out = xorlab(&["rank-profile", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn budget_refusal_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let mut cfg = smoke_config("wp-stats");
    cfg["standard_budget"] = json!(10);
    let path = write_config(dir.path(), "c.json", cfg);
    let out = xorlab(&[
        "wp-stats",
        "--config",
        &path,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn every_experiment_runs_at_small_n() {
    let dir = TempDir::new().unwrap();
    for exp in [
        "rank-profile",
        "threshold-scan",
        "wp-stats",
        "balance",
        "peel",
        "interpolate",
        "audit-freeness",
    ] {
        let path = write_config(dir.path(), &format!("{exp}.json"), smoke_config(exp));
        let out_dir = dir.path().join(exp);
        let start = Instant::now();
        let out = xorlab(&[exp, "--config", &path, "--out", out_dir.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{exp}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(start.elapsed().as_secs() < 60, "{exp} too slow");
        for f in ["trials.csv", "summary.csv", "run.json"] {
            assert!(out_dir.join(f).exists(), "{exp} missing {f}");
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["experiment"], exp);
        assert_eq!(manifest["master_seed"], 7);
        for rec in
            read_trials_csv(std::fs::File::open(out_dir.join("trials.csv")).unwrap()).unwrap()
        {
            if let (Some(r), Some(nl)) = (rec.rank, rec.nullity) {
                assert_eq!(r + nl, rec.n);
            }
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mut cfg = smoke_config("peel");
    cfg["params"]["n"] = json!(400);
    cfg["trials"] = json!(6);
    cfg["densities"] = json!([1.5, 2.5, 3.3]);
    let path = write_config(dir.path(), "c.json", cfg);
    let read = |d: &str| {
        let o = dir.path().join(d);
        let out = xorlab(&[
            "peel",
            "--config",
            &path,
            "--out",
            o.to_str().unwrap(),
            "--workers",
            &d[1..],
        ]);
        assert!(out.status.success());
        (
            std::fs::read(o.join("trials.csv")).unwrap(),
            std::fs::read(o.join("summary.csv")).unwrap(),
        )
    };
    let a = read("a1");
    assert_eq!(a, read("b1"));
    assert_eq!(a, read("c3"));
}

#[test]
fn summary_is_recomputable_from_trials() {
    let dir = TempDir::new().unwrap();
    let mut cfg = smoke_config("rank-profile");
    cfg["params"]["n"] = json!(300);
    cfg["trials"] = json!(12);
    cfg["densities"] = json!([2.4, 2.75, 3.0]);
    let path = write_config(dir.path(), "c.json", cfg);
    let o = dir.path().join("o");
    assert!(xorlab(&[
        "rank-profile",
        "--config",
        &path,
        "--out",
        o.to_str().unwrap()
    ])
    .status
    .success());
    let trials = read_trials_csv(std::fs::File::open(o.join("trials.csv")).unwrap()).unwrap();
    let mut summary = csv::Reader::from_path(o.join("summary.csv")).unwrap();
    let header = summary.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut rows = 0;
    for row in summary.records() {
        let row = row.unwrap();
        let d: f64 = row[col("d")].parse().unwrap();
        let group: Vec<_> = trials.iter().filter(|t| t.d == d).collect();
        assert_eq!(group.len(), 12);
        let full = group
            .iter()
            .filter(|t| t.full_row_rank == Some(true))
            .count() as f64
            / 12.0;
        let nullity = group.iter().map(|t| t.nullity.unwrap() as f64).sum::<f64>() / 12.0;
        assert_eq!(row[col("full_rank_frac")].parse::<f64>().unwrap(), full);
        assert!((row[col("mean_nullity")].parse::<f64>().unwrap() - nullity).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 3);
}

#[test]
fn threshold_subcommand_reports_known_values() {
    let out = xorlab(&["threshold", "--k", "3", "--d", "2.9"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["d_k_over_k"].as_f64().unwrap() - 0.917935).abs() < 1e-5);
    assert!((v["fixed_points"]["alpha_f"].as_f64().unwrap() - 0.90888).abs() < 1e-4);
}
