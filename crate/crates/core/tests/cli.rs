//! Exit codes and subcommands of the `dpogd` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
horizon = 120
seeds = [0, 1]
algorithms = ["dpogd", "pogd-slowed"]
schedule = { kind = "explicit", steps = [2] }

[problem]
nodes = 4
n = 5
d = 2
sparsity = 2

[step]
dpogd = 0.01
pogd = 0.01

[sweep]
families = [1, "n-1"]
steps = [2]
"#;

fn dpogd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpogd"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_then_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("run");
    let r = dpogd(&["run", &cfg, "--out", s(&out), "--threads", "2"]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(out.join("seed-0/dpogd_metrics.csv").exists());
    assert!(out.join("median_metrics.csv").exists());

    let p = dpogd(&["plot", s(&out), "--style", "fig1"]);
    assert_eq!(
        p.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&p.stderr)
    );
    assert!(out.join("fig1.svg").exists());
}

#[test]
fn seed_flag_restricts_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("one");
    let r = dpogd(&["run", &cfg, "--out", s(&out), "--seed", "7"]);
    assert_eq!(r.status.code(), Some(0));
    assert!(out.join("seed-7").is_dir());
    assert!(!out.join("seed-0").exists());
}

#[test]
fn sweep_then_fig2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("sweep");
    let r = dpogd(&["sweep", &cfg, "--out", s(&out), "--seed", "3"]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let p = dpogd(&["plot", s(&out), "--style", "fig2"]);
    assert_eq!(
        p.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&p.stderr)
    );
    assert!(out.join("fig2.svg").exists());
}

#[test]
fn validate_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let r = dpogd(&["validate", &cfg]);
    assert_eq!(r.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["matrices_failed"].as_array().unwrap().len(), 0);
    assert!(v["window"].as_u64().is_some());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write(tmp.path(), "bad.toml", "horizon = 10\nbogus = 1\n");
    assert_eq!(dpogd(&["run", &unknown]).status.code(), Some(2));
    let iota = write(
        tmp.path(),
        "iota.toml",
        &format!("{TINY}\n[graph]\nfamily = 9\n"),
    );
    assert_eq!(dpogd(&["validate", &iota]).status.code(), Some(2));
    let missing = tmp.path().join("missing.toml");
    assert_ne!(dpogd(&["run", s(&missing)]).status.code(), Some(0));
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TINY
        .replace("dpogd = 0.01", "dpogd = 50.0")
        .replace("sparsity = 2", "sparsity = 2\nradius = inf");
    let cfg = write(tmp.path(), "div.toml", &text);
    let r = dpogd(&["run", &cfg, "--out", s(&tmp.path().join("o"))]);
    assert_eq!(
        r.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn oracle_failure_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "orc.toml",
        &format!("{TINY}\n[oracle]\ntol = 1e-300\nmax_iter = 1\n"),
    );
    let r = dpogd(&["run", &cfg, "--out", s(&tmp.path().join("o"))]);
    assert_eq!(
        r.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}
