use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dgtnash"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

const PUBLISHED_NE: [f64; 5] = [3.9478, 9.3400, 14.7321, 20.1243, 25.5165];

#[test]
fn bundled_cournot_run_matches_the_equilibrium() {
    let out_dir = TempDir::new().unwrap();
    let cfg = bundled("cournot.toml");
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.path().join("cournot_report.json")).unwrap()).unwrap();
    assert_eq!(report, json(&out));
    assert_eq!(report["status"], "converged");
    assert!(report["max_abs_error"].as_f64().unwrap() <= 5e-5);
    assert_eq!(report["alpha_used"].as_f64().unwrap(), 0.02);
    for key in ["ne", "dgt_final", "empirical_rate", "alpha_star", "max_step", "iterations"] {
        assert!(!report[key].is_null(), "missing {key}");
    }
    for (x, p) in report["ne"].as_array().unwrap().iter().zip(PUBLISHED_NE) {
        assert!((x.as_f64().unwrap() - p).abs() < 5e-5);
    }
    let trace = fs::read_to_string(out_dir.path().join("cournot_trace.csv")).unwrap();
    let iterations = report["iterations"].as_u64().unwrap() as usize;
    assert_eq!(trace.lines().count(), iterations + 2);
    assert_eq!(trace.lines().next().unwrap(), "iter,consensus_gap,optimality_gap,tracker_gap,ne_residual");
}

#[test]
fn fixed_seed_gives_identical_traces() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = bundled("random.toml");
    for dir in [&a, &b] {
        let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ta = fs::read(a.path().join("random_trace.csv")).unwrap();
    let tb = fs::read(b.path().join("random_trace.csv")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn simnet_and_engine_share_the_trace_schema() {
    let dir = TempDir::new().unwrap();
    let cfg = bundled("random.toml");
    let mut finals = Vec::new();
    for mode in ["engine", "simnet"] {
        let sub = dir.path().join(mode);
        let out = run(&["simulate", "--mode", mode, "--config", cfg.to_str().unwrap(), "--out-dir", sub.to_str().unwrap()]);
        assert!(out.status.success());
        let report = json(&out);
        assert_eq!(report["mode"], mode);
        finals.push(report["dgt_final"].clone());
        let trace = fs::read_to_string(sub.join("random_trace.csv")).unwrap();
        assert!(trace.starts_with("iter,consensus_gap,optimality_gap,tracker_gap,ne_residual\n"));
    }
    for (e, s) in finals[0].as_array().unwrap().iter().zip(finals[1].as_array().unwrap()) {
        assert!((e.as_f64().unwrap() - s.as_f64().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn auto_step_is_half_the_bound() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "auto.toml", "[algorithm]\nalpha = \"auto\"\nmax_iters = 20\n");
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["status"], "max_iters");
    assert_eq!(report["iterations"], 20);
    let half = 0.5 * report["max_step"].as_f64().unwrap();
    assert_eq!(report["alpha_used"].as_f64().unwrap(), half);
}

#[test]
fn divergence_exits_with_three_and_is_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "big.toml", "[algorithm]\nalpha = 5.0\n");
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "diverged");
    assert!(report["error"].as_str().unwrap().contains("diverged"));
}

#[test]
fn config_errors_exit_with_two_and_name_the_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.toml", "[game]\nkind = \"cournot\"\n[algorithm]\nalpha = -0.5\n");
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:4"), "{err}");

    let out = run(&["run", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn broken_edge_list_points_at_the_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("g.txt"), "0 1\n1 2\n2 x\n").unwrap();
    let cfg = write_config(
        &dir,
        "edges.toml",
        "[game]\nkind = \"quadratic-random\"\ncluster_sizes = [3, 3]\n[topology]\nintra = \"g.txt\"\n[algorithm]\nalpha = 0.1\n",
    );
    let out = run(&["validate-topology", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("g.txt:3"));

    fs::write(dir.path().join("g.txt"), "0 1\n").unwrap();
    let out = run(&["validate-topology", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not connected"));
}

#[test]
fn precondition_failures_exit_with_four() {
    let dir = TempDir::new().unwrap();
    // a lone agent never mixes, so the step-size bound is undefined
    let cfg = write_config(
        &dir,
        "lone.toml",
        "[game]\nkind = \"quadratic-random\"\ncluster_sizes = [1]\n[algorithm]\nalpha = \"auto\"\n",
    );
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["compute-bound", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn solve_ne_prints_cluster_blocks() {
    let cfg = bundled("cournot.toml");
    for extra in [None, Some("--descent")] {
        let mut args = vec!["solve-ne", "--config", cfg.to_str().unwrap()];
        args.extend(extra);
        let out = run(&args);
        assert!(out.status.success());
        let v = json(&out);
        let clusters = v["clusters"].as_array().unwrap();
        assert_eq!(clusters.len(), 5);
        for (block, p) in clusters.iter().zip(PUBLISHED_NE) {
            assert!((block[0].as_f64().unwrap() - p).abs() < 5e-5);
        }
        assert!(v["residual"].as_f64().unwrap() < 1e-6);
        let method = if extra.is_some() { "descent" } else { "linear_solve" };
        assert_eq!(v["method"], method);
    }
}

#[test]
fn compute_bound_and_topology_summaries() {
    let cfg = bundled("cournot.toml");
    let out = run(&["compute-bound", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let b = json(&out);
    for key in ["sigma", "sigma_max", "alpha_star", "radicand_bound", "max_step", "rho_at_half_bound"] {
        assert!(b[key].is_number(), "missing {key}");
    }
    assert!((b["radicand_bound"].as_f64().unwrap() - 105.0 / 428.4).abs() < 1e-12);
    assert!(b["rho_at_half_bound"].as_f64().unwrap() < 1.0);

    let out = run(&["validate-topology", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let t = json(&out);
    assert_eq!(t["agents"], 100);
    assert!((t["pi_representative"].as_f64().unwrap() - 2.0 / 105.0).abs() < 1e-15);
}
