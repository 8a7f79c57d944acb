use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn penning(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penning"))
        .args(args)
        .env_remove("PENNING_TOL")
        .env_remove("PENNING_CONFIG")
        .output()
        .expect("run penning")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("c.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn equilibrium_smoke_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"n_ions": 7, "omega_wall_over_omega_z": 0.0, "omega_eff_over_omega_z": 0.16}"#);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = penning(&["equilibrium", "--config", &cfg, "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(a.join("positions.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("positions.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.starts_with("index,x_l0,y_l0"));

    let m = json(&a.join("manifest.json"));
    assert_eq!(m["subcommand"], "equilibrium");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert!(outputs.contains(&"positions.csv") && outputs.contains(&"crystal.json"));
    assert!(m["tolerances"]["equilibrium_tol"].as_f64().unwrap() > 0.0);
}

#[test]
fn modes_feed_jmatrix_and_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"n_ions": 19, "omega_wall_over_omega_z": 0.04, "omega_eff_over_omega_z": 0.16}"#);
    let modes = tmp.path().join("modes");
    let o = penning(&["modes", "--branch", "axial", "--config", &cfg, "--out", s(&modes)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&modes.join("axial_summary.json"));
    assert!((summary["max_frequency"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let jdir = tmp.path().join("j");
    let o = penning(&["jmatrix", "--branch", "axial", "--modes", s(&modes), "--delta", "0.1", "--out", s(&jdir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(jdir.join("jmatrix.csv")).unwrap();
    assert_eq!(csv.lines().count(), 19);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 19);
    let manifest = json(&jdir.join("manifest.json"));
    assert!(manifest["inputs"].as_array().unwrap().len() >= 3);

    for (cmd, file) in [("fit", "fit.json"), ("hist", "hist.json"), ("corr", "corr.json")] {
        let out = tmp.path().join(cmd);
        let o = penning(&[cmd, "--jmatrix", s(&jdir), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join(file).exists() && out.join("manifest.json").exists());
    }
    let fit = json(&tmp.path().join("fit/fit.json"));
    assert!(fit["exponent"].as_f64().unwrap() > 0.0);
    let corr = json(&tmp.path().join("corr/corr.json"));
    let shells = corr["subshells"].as_array().unwrap();
    assert_eq!(shells.iter().map(|s| s["points"].as_array().unwrap().len()).sum::<usize>(), 18);
}

#[test]
fn planar_modes_and_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"n_ions": 7, "omega_wall_over_omega_z": 0.04, "omega_eff_over_omega_z": 0.16}"#);
    let out = tmp.path().join("p");
    let o = penning(&[
        "modes", "--branch", "planar", "--config", &cfg, "--out", s(&out), "--frames", "4", "--frame-modes", "0,13",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("planar_summary.json"));
    assert_eq!(summary["lower_branch"].as_array().unwrap().len(), 7);
    assert_eq!(summary["upper_branch"].as_array().unwrap().len(), 7);
    let frames = fs::read_to_string(out.join("frames_mode13.csv")).unwrap();
    assert_eq!(frames.lines().count(), 1 + 4 * 7);

    let j = tmp.path().join("j");
    let o = penning(&["jmatrix", "--branch", "planar", "--modes", s(&out), "--mu", "1e-3", "--out", s(&j)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = penning(&["jmatrix", "--branch", "planar", "--modes", s(&out), "--midgap", "2", "--out", s(&j)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cfg = write_config(tmp.path(), r#"{"n_ions": 7, "omega_eff_over_omega_z": 0.16, "frobnicate": 3}"#);
    let o = penning(&["equilibrium", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("frobnicate"));

    let o = penning(&["equilibrium", "--bogus-flag", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(tmp.path(), r#"{"n_ions": 7, "omega_wall_over_omega_z": 0.3, "omega_eff_over_omega_z": 0.16}"#);
    let o = penning(&["equilibrium", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "unconfined config is invalid input");

    let cfg = write_config(tmp.path(), r#"{"n_ions": 30, "omega_eff_over_omega_z": 0.16}"#);
    let o = Command::new(env!("CARGO_BIN_EXE_penning"))
        .args(["equilibrium", "--config", &cfg, "--out", s(&out)])
        .env("PENNING_MAX_ITERATIONS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("did not converge"));
}

#[test]
fn scan_over_ion_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"n_ions": 2, "omega_wall_over_omega_z": 0.04, "omega_eff_over_omega_z": 0.3}"#);
    let out = tmp.path().join("scan");
    let o = penning(&[
        "scan", "--type", "one-to-two", "--n", "2..6:2", "--resolution", "1e-3", "--workers", "2", "--config", &cfg, "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![2.0, 4.0, 6.0]);
    assert!((rows[0][1] - (1.0f64 + 0.04 * 0.04).sqrt()).abs() < 1e-3);
    assert!(rows[0][1] > rows[1][1] && rows[1][1] > rows[2][1]);
}
