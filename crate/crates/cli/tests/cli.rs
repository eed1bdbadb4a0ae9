use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spikelab(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spikelab"));
    cmd.arg("--out").arg(dir.join("out")).args(args).current_dir(dir);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn ground_state_identities_and_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikelab(dir.path(), &["ground-state"], &[]);
    assert!(out.status.success());
    let g = json(&dir.path().join("out/ground_state.json"));
    let m = g["m_k"].as_f64().unwrap();
    let half = g["half_grad_norm_sq"].as_f64().unwrap();
    assert!((m / half - 1.0).abs() < 1e-6);
    assert!(dir.path().join("out/profile.csv.manifest.json").exists());

    let dir2 = tempfile::tempdir().unwrap();
    let out = spikelab(dir2.path(), &["ground-state", "--k", "2"], &[]);
    assert!(out.status.success());
    let m2 = json(&dir2.path().join("out/ground_state.json"))["m_k"].as_f64().unwrap();
    assert!((m2 / (2.0 * m) - 1.0).abs() < 1e-6);
}

#[test]
fn mcurve_table_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikelab(dir.path(), &["ground-state", "--mcurve", "0.5:2:8"], &[]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("out/mcurve.csv")).unwrap();
    let m: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(m.len(), 8);
    assert!(m.windows(2).all(|w| w[1] > w[0]));
    let bad = spikelab(dir.path(), &["mcurve", "--range", "2:1:8"], &[]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn property_checks_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    assert!(spikelab(dir.path(), &["truncation-check"], &[]).status.success());
    assert!(spikelab(dir.path(), &["potential-check"], &[]).status.success());
    let report = json(&dir.path().join("out/truncation_check.json"));
    assert_eq!(report["crossover_r"], report["closed_form_r"]);

    let cfg = write_config(dir.path(), r#"{"truncation": {"a": 0.43, "radii": [0.2, 0.5, 0.6, 0.7, 0.8]}}"#);
    let out = spikelab(dir.path(), &["--config", &cfg, "truncation-check"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 < a < (1 - 2/mu) alpha1"));

    let cfg = write_config(dir.path(), r#"{"potential": {"kind": "custom_polynomial_bump", "dim": 2}}"#);
    let out = spikelab(dir.path(), &["--config", &cfg, "potential-check"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no admissible radius"));

    let cfg = write_config(dir.path(), "{not json");
    assert_eq!(spikelab(dir.path(), &["--config", &cfg, "spike", "--eps", "0.1"], &[]).status.code(), Some(1));
}

#[test]
fn spike_writes_summary_field_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikelab(dir.path(), &["--n", "64", "spike", "--eps", "0.2"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    let s = json(&o.join("spike_eps0.2.json"));
    assert!(s["energy"].as_f64().unwrap() <= s["cone_max"].as_f64().unwrap());
    let side = json(&o.join("u_eps0.2.json"));
    assert_eq!(side["n"], 64);
    assert_eq!(side["eps"], 0.2);
    assert!(side["L"].as_f64().unwrap() > 0.0 && side["description"].is_string());
    assert_eq!(std::fs::metadata(o.join("u_eps0.2.bin")).unwrap().len(), 8 * 64 * 64);
    let hashes: Vec<Value> = ["spike_eps0.2.json", "u_eps0.2.bin", "slice_eps0.2.csv"]
        .iter()
        .map(|f| json(&o.join(format!("{f}.manifest.json")))["config_hash"].clone())
        .collect();
    assert!(hashes.iter().all(|h| h == &hashes[0] && h.as_str().unwrap().len() == 64));
}

#[test]
fn sweep_reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--n", "64", "sweep", "--eps-list", "0.2,0.1"];
    assert!(spikelab(a.path(), &args, &[("SPIKELAB_THREADS", "1")]).status.success());
    assert!(spikelab(b.path(), &args, &[("SPIKELAB_THREADS", "2")]).status.success());
    for f in ["sweep.csv", "convergence.csv", "slice_eps0.1.csv", "u_eps0.1.bin"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let csv = std::fs::read_to_string(a.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",1,ok")));

    let out = spikelab(a.path(), &["report", "--from", "out"], &[]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}

#[test]
fn degree_reports_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikelab(dir.path(), &["--n", "64", "degree", "--eps", "0.1"], &[]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1");
    let trace = std::fs::read_to_string(dir.path().join("out/degree_trace_eps0.1.csv")).unwrap();
    // dim E = 1: the boundary of the ball is two points, mapped to opposite signs
    let psi: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(psi.len(), 2);
    assert!(psi[0] < 0.0 && psi[1] > 0.0);
}

#[test]
fn failure_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"solver": {"max_iter": 1}}"#);
    let out = spikelab(dir.path(), &["--config", &cfg, "--n", "64", "spike", "--eps", "0.2"], &[]);
    assert_eq!(out.status.code(), Some(4));
    // partial sweeps still write their table
    let out = spikelab(dir.path(), &["--config", &cfg, "--n", "64", "sweep", "--eps-list", "0.2"], &[]);
    assert_eq!(out.status.code(), Some(4));
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with("saddle_divergence"));

    let out = spikelab(dir.path(), &["--n", "64", "sweep"], &[("SPIKELAB_THREADS", "0")]);
    assert_eq!(out.status.code(), Some(1));
}
