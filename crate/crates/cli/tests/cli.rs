//! End-to-end runs of the `reltrace` binary.

use std::path::Path;
use std::process::{Command, Output};

fn reltrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reltrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

/// Multipole value for two unit discs at (±2, 0), κ = 1, Dirichlet.
const FROZEN_DIRICHLET_GAP2_K1: f64 = -4.4665337040976e-3;

const DISCS: &str = r#"
version = 1
[geometry]
kind = "planar"
components = [
    { shape = "circle", center = [-2.0, 0.0], radius = 1.0 },
    { shape = "circle", center = [2.0, 0.0], radius = 1.0 },
]
[kappa]
values = [1.0]
[mesh]
resolutions = [64]
"#;

#[test]
fn xi_on_the_disc_pair_reproduces_the_frozen_multipole_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISCS);
    let out = dir.path().join("out");
    let o = reltrace(&["xi", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("xi_dirichlet_n64.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let xi: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((xi - FROZEN_DIRICHLET_GAP2_K1).abs() < 1e-12, "{xi}");
    assert!(out.join("xi_dirichlet_manifest.json").exists());
}

#[test]
fn empty_kappa_grid_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &DISCS.replace("values = [1.0]", "values = []"));
    let o = reltrace(&["xi", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_config_is_a_usage_error() {
    assert_eq!(reltrace(&["energy"]).status.code(), Some(1));
    assert_eq!(
        reltrace(&["energy", "--config", "/nonexistent/run.toml"]).status.code(),
        Some(1)
    );
}

#[test]
fn plates_prints_energies_next_to_closed_forms() {
    let o = reltrace(&["plates", "--gap", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let line = v["line"]["value"].as_f64().unwrap();
    let exact = v["line_exact"].as_f64().unwrap();
    assert!((line / exact - 1.0).abs() < 1e-8);
    assert!((exact + std::f64::consts::PI / 48.0).abs() < 1e-15);
}

#[test]
fn verify_fast_is_green_and_the_flipped_n_mutation_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let o = reltrace(&["verify", "fast", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);

    let o = reltrace(&["verify", "fast", "--mutate", "flip-n"]);
    assert_eq!(o.status.code(), Some(3));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL  sn factorization")), "{text}");
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            reltrace_cli::config::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}
