use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn critdet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critdet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn disc_grid_writes_orbits_and_chart() {
    let tmp = TempDir::new().unwrap();
    let o = critdet(tmp.path(), &["disc", "--coeffs", "paneitz", "--grid", "9", "--out", "d"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = tmp.path().join("d");
    let orbits: Vec<_> = (0..9).map(|i| d.join(format!("orbit_{i:03}.csv"))).collect();
    assert!(orbits.iter().all(|p| p.exists()));
    assert!(!d.join("orbit_009.csv").exists());
    let header = fs::read_to_string(&orbits[4]).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,x,y,z,K,Q");

    let chart = json(&d.join("chart.json"));
    assert_eq!(chart["orbits"].as_array().unwrap().len(), 9);
    assert_eq!(chart["nested"], Value::Bool(true));
    assert!((chart["range"]["c_lo"].as_f64().unwrap() - 26.0).abs() < 1e-9);
    assert!((chart["range"]["c_hi"].as_f64().unwrap() - 28.0).abs() < 1e-9);
}

#[test]
fn manifest_digests_match_files() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&critdet(tmp.path(), &["disc", "--grid", "3", "--out", "d", "-q"])), 0);
    let d = tmp.path().join("d");
    let m = json(&d.join("manifest.json"));
    assert_eq!(m["command"], "disc");
    assert_eq!(m["coefficients"]["source"], "paneitz");
    assert!(m["parameters"]["grid"].as_u64() == Some(3));
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 5);
    for rec in outputs {
        let bytes = fs::read(d.join(rec["file"].as_str().unwrap())).unwrap();
        assert_eq!(rec["sha256"].as_str().unwrap(), hex(&bytes));
        assert_eq!(rec["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    let stray = fs::read_dir(&d).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp")
    });
    assert_eq!(stray.count(), 0);
}

#[test]
fn eps_bar_record() {
    let tmp = TempDir::new().unwrap();
    let args = ["eps-bar", "--coeffs", "paneitz", "--bracket", "0,10", "--tol", "1e-6", "--out", "e"];
    let o = critdet(tmp.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = tmp.path().join("e");
    let rec = json(&d.join("eps_bar.json"));
    let eps_bar = rec["eps_bar"].as_f64().unwrap();
    assert!((eps_bar - 0.85520056784).abs() < 2e-6, "{eps_bar}");
    let adm = json(&d.join("admissibility.json"));
    assert_eq!(adm["report"]["admissible"], Value::Bool(true));
    let sphere = fs::read_to_string(d.join("sphere.csv")).unwrap();
    assert_eq!(sphere.lines().next().unwrap(), "x5,w");
}

#[test]
fn bubble_default_grid_slope_report() {
    let tmp = TempDir::new().unwrap();
    let o = critdet(tmp.path(), &["bubble", "--eps-grid", "default", "--out", "b"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = tmp.path().join("b");
    let runs = fs::read_to_string(d.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 8);
    let fit = json(&d.join("fit.json"));
    let omega3 = 2.0 * std::f64::consts::PI.powi(2);
    let p = fit["fit"]["p"]["separated"]["slope"].as_f64().unwrap() / (-24.0 * omega3);
    let tau = fit["fit"]["tau"]["separated"]["slope"].as_f64().unwrap() / (-528.0 * omega3);
    assert!((p - 1.0).abs() < 0.05, "{p}");
    assert!((tau - 1.0).abs() < 0.05, "{tau}");
    assert!(fit["cutoff"].as_str().unwrap().starts_with("eta(r) = 1 - (10 s^3"));
}

#[test]
fn replay_reproduces_digests() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.cfg"), "# shooting run\neps = 0.05\nt_max = 100\nrel-tol = 1e-11\n").unwrap();
    let first = critdet(tmp.path(), &["shoot", "--config", "run.cfg", "--omega", "--out", "s", "-q"]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let m = json(&tmp.path().join("s/manifest.json"));
    assert_eq!(m["config"]["eps"], "0.05");
    assert_eq!(m["parameters"]["shoot"]["integrator"]["rel_tol"].as_f64(), Some(1e-11));

    let again = critdet(tmp.path(), &["replay", "s/manifest.json", "--out", "r", "-q"]);
    assert_eq!(code(&again), 0, "{}", String::from_utf8_lossy(&again.stderr));
    let report = json(&tmp.path().join("r/replay.json"));
    assert_eq!(report["identical"], Value::Bool(true));
    for f in ["trajectory.csv", "profile.csv", "outcome.json", "omega.json"] {
        let a = fs::read(tmp.path().join("s").join(f)).unwrap();
        let b = fs::read(tmp.path().join("r").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn replay_detects_tampered_digest() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&critdet(tmp.path(), &["stationary", "--out", "s", "-q"])), 0);
    let path = tmp.path().join("s/manifest.json");
    let mut m = json(&path);
    m["outputs"][0]["sha256"] = Value::String("0".repeat(64));
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let o = critdet(tmp.path(), &["replay", "s/manifest.json", "-q"]);
    assert_eq!(code(&o), 4);
    let report = json(&tmp.path().join("s/replay/replay.json"));
    assert_eq!(report["identical"], Value::Bool(false));
}

#[test]
fn flags_override_config() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.cfg"), "eps = 0.2\ncoeffs = half-torsion\n").unwrap();
    let o = critdet(tmp.path(), &["shoot", "--config", "c.cfg", "--eps", "0.1", "--out", "s", "-q"]);
    assert_eq!(code(&o), 0);
    let m = json(&tmp.path().join("s/manifest.json"));
    assert_eq!(m["parameters"]["eps"].as_f64(), Some(0.1));
    assert_eq!(m["coefficients"]["source"], "half-torsion");
    assert!((m["coefficients"]["beta"].as_f64().unwrap() + 31.0 / 58.0).abs() < 1e-15);
}

#[test]
fn bad_arguments_exit_two() {
    let tmp = TempDir::new().unwrap();
    let cases: &[&[&str]] = &[
        &["shoot", "--bogus"],
        &["shoot", "--beta", "-1"],
        &["shoot", "--coeffs", "nonsense"],
        &["eps-bar", "--bracket", "1,0.5"],
        &["eps-bar", "--bracket", "1"],
        &["orbit", "--h", "100"],
        &["orbit"],
        &["shoot", "--eps", "0.3", "--gronwall-delta", "0.05"],
        &["shoot", "--rel-tol", "1e-30"],
        &["bubble", "--eps-grid", "0.5"],
        &["disc", "--coeffs", "conformal-laplacian"],
        &["shoot", "--config", "missing.cfg"],
    ];
    for args in cases {
        let mut a = args.to_vec();
        a.extend(["--out", "x", "-q"]);
        assert_eq!(code(&critdet(tmp.path(), &a)), 2, "{args:?}");
    }
}

#[test]
fn numerical_failure_exits_three() {
    let tmp = TempDir::new().unwrap();
    let o = critdet(tmp.path(), &["linearize", "--max-step", "1e-7", "--out", "x"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_invariants_pass_and_fail() {
    let tmp = TempDir::new().unwrap();
    let ok = critdet(tmp.path(), &["verify-invariants", "--samples", "10", "--seed", "7", "--out", "v", "-q"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let r = json(&tmp.path().join("v/residuals.json"));
    assert_eq!(r["pass"], Value::Bool(true));
    assert!(r["max"]["k"].as_f64().unwrap() <= 1e-6);

    let strict = ["verify-invariants", "--samples", "10", "--seed", "7", "--tol", "1e-14", "--out", "w", "-q"];
    let bad = critdet(tmp.path(), &strict);
    assert_eq!(code(&bad), 4);
    assert!(tmp.path().join("w/manifest.json").exists());
}

#[test]
fn remaining_subcommands_run() {
    let tmp = TempDir::new().unwrap();
    let cases: &[&[&str]] = &[
        &["delaunay", "--alphas", "0.25,0.5", "--orbits"],
        &["orbit", "--h", "2", "--special", "--figure"],
        &["orbit", "--c", "28", "--special"],
        &["classify-potential", "--c", "0,20,40"],
        &["classify-potential", "--beta", "-2", "--c", "5"],
        &["linearize"],
        &["explore-beta", "--beta", "-0.2"],
        &["shoot", "--eps", "1e-6", "--gronwall-delta", "0.1"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let mut a = args.to_vec();
        let out = format!("o{i}");
        a.extend(["--out", &out, "-q"]);
        let o = critdet(tmp.path(), &a);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(tmp.path().join(&out).join("manifest.json").exists());
    }
    let fam = fs::read_to_string(tmp.path().join("o0/family.csv")).unwrap();
    let row: Vec<f64> = fam.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[2] - 0.741063280210).abs() < 1e-9);
    assert!((row[3] - 2.759346328495).abs() < 1e-9);
    let cases = json(&tmp.path().join("o4/cases.json"));
    assert_eq!(cases[0]["report"]["case"], "Coercive");
    let phi = json(&tmp.path().join("o5/phi.json"));
    assert!((phi["phi0"].as_f64().unwrap() + 3.0 / 14.0).abs() < 1e-12);
}
