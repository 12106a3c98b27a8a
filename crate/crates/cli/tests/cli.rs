use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polint")).args(args).output().expect("binary runs")
}

fn polint_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polint")).env("POLINT_THREADS", threads).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn lists_every_preset() {
    let text = ok(&polint(&["list-presets"]));
    for name in ["kdv-soliton-fi", "kdv-soliton-li-cons", "airy", "airy-unstable", "gkdv-p4", "gkdv-p6"] {
        assert!(text.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn airy_below_threshold_reports_blow_up() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = ok(&polint(&["run", "--preset", "airy", "--theta", "0.49", "--out", out]));
    assert!(text.contains("BLOW-UP"));
    let s = summary(dir.path());
    assert_eq!(s["schema"], 1);
    assert_eq!(s["blew_up"], true);
    assert!(s["blow_up_step"].as_u64().unwrap() > 0);
    assert_eq!(s["artifacts"][0], "steps.csv");
}

#[test]
fn runs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&polint(&["run", "--preset", "kdv-soliton-li-cons", "--t-end", "2", "--out", d.path().to_str().unwrap()]));
    }
    let ca = fs::read(a.path().join("steps.csv")).unwrap();
    assert_eq!(ca, fs::read(b.path().join("steps.csv")).unwrap());
    assert_eq!(fs::read(a.path().join("summary.json")).unwrap(), fs::read(b.path().join("summary.json")).unwrap());
    let text = String::from_utf8(ca).unwrap();
    assert_eq!(text.lines().next().unwrap(), "step,t,H_d,polarised_H_d,sup_norm,solve_count,shape_err,distance_err");
    assert_eq!(text.lines().count(), 1 + 21);
}

#[test]
fn sweep_rows_are_ordered_and_independent_of_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "sweep".to_string(),
            "--preset".into(),
            "kdv-soliton-li-cons".into(),
            "--t-end".into(),
            "1".into(),
            "--dts".into(),
            "0.1,0.05,0.025,0.0125".into(),
            "--schemes".into(),
            "li-cons,fi-cons".into(),
            "--out".into(),
            d.to_str().unwrap().into(),
        ]
    };
    let av = args(a.path());
    let bv = args(b.path());
    ok(&polint_env(&av.iter().map(String::as_str).collect::<Vec<_>>(), "1"));
    ok(&polint_env(&bv.iter().map(String::as_str).collect::<Vec<_>>(), "4"));
    let ca = fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(ca, fs::read_to_string(b.path().join("sweep.csv")).unwrap());
    let mut rdr = csv::Reader::from_reader(ca.as_bytes());
    let rows: Vec<(String, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 8);
    assert!(rows[..4].iter().all(|r| r.0 == "li-cons"));
    assert!(rows[4..].iter().all(|r| r.0 == "fi-cons"));
    assert_eq!(rows[..4].iter().map(|r| r.1).collect::<Vec<_>>(), vec![0.1, 0.05, 0.025, 0.0125]);
    let s = summary(a.path());
    assert_eq!(s["reference"], "fi-cons-dt/64");
    assert!(s["convergence_slopes"][0]["slope"].as_f64().unwrap() > 1.0);
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let toml_text = ok(&polint(&["show-preset", "gkdv-p4"]));
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, toml_text.replace("t_end = 10.0", "t_end = 0.5")).unwrap();
    let out = dir.path().join("out");
    ok(&polint(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let s = summary(&out);
    assert_eq!(s["steps"], 50);
    assert_eq!(s["k"], 2);
    assert!(s["max_rel_dev_polarised"].as_f64().unwrap() < 1e-12);
}

#[test]
fn invalid_input_is_rejected() {
    let out = polint(&["run", "--preset", "kdv-soliton-li-cons", "--dt", "-0.1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt must be positive"));
    let out = polint(&["run", "--preset", "no-such-preset"]);
    assert!(!out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scheme = \"li-cons\"\nunknown_key = 1\n").unwrap();
    assert!(!polint(&["run", "--config", cfg.to_str().unwrap()]).status.success());
    assert!(!polint(&["stability", "--theta", "1.5"]).status.success());
}

#[test]
fn stability_command_matches_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&polint(&["stability", "--theta", "0.49", "--out", dir.path().to_str().unwrap()]));
    assert!(text.contains("UNSTABLE"));
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("stability.json")).unwrap()).unwrap();
    let th = doc["threshold_at_tau_max"].as_f64().unwrap();
    assert!((th - 0.499335).abs() < 1e-6);
    assert!(ok(&polint(&["stability", "--theta", "0.5"])).contains("stable"));
    assert!(ok(&polint(&["stability", "--theta", "0.3", "--tau-range", "-1", "1"])).contains(" stable"));
}

#[test]
fn polarise_dump_uses_exact_coefficients() {
    let text = ok(&polint(&["polarise", "--density", "(1/2)*u_x^2 - (1/3)*u^3", "--k", "2"]));
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["k"], 2);
    let coeffs: Vec<&str> = doc["terms"].as_array().unwrap().iter().map(|t| t["coeff_text"].as_str().unwrap()).collect();
    assert!(coeffs.contains(&"1/8"), "{coeffs:?}");
}

#[test]
fn theta_sweep_brackets_the_airy_transition() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&polint(&["sweep", "--preset", "airy-unstable", "--thetas", "0.45,0.47,0.49,0.5,0.52,0.55", "--out", out]));
    let s = summary(dir.path());
    assert_eq!(s["unstable_theta_max"], 0.49);
    assert_eq!(s["stable_theta_min"], 0.5);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn sweep_where_every_row_fails_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    // A single Newton iteration never meets the tolerance, so every row fails.
    fs::write(
        &cfg,
        "scheme = \"fi-cons\"\ndt = 0.1\nt_end = 0.2\nnewton = { tol = 1e-13, max_iters = 1 }\n[equation]\nkind = \"kdv\"\n[grid]\nn_points = 32\nlength = 10.0\nleft = -5.0\n",
    )
    .unwrap();
    let out = polint(&["sweep", "--config", cfg.to_str().unwrap(), "--dts", "0.1,0.05", "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("every sweep row failed"));
}
