//! End-to-end runs of the `transit` binary.

use std::path::Path;
use std::process::{Command, Output};

fn transit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transit")).current_dir(dir).args(args).output().expect("binary runs")
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sample_is_reproducible_and_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--d", "3", "--mu", "0", "--n", "300", "--seed", "7", "--out"];
    for name in ["a.csv", "b.csv"] {
        let mut a = args.to_vec();
        a.push(name);
        assert!(transit(dir.path(), &a).status.success());
    }
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    for key in ["# git_rev: ", "# config_hash: sha256:", "# seed: 7", "# tolerances: "] {
        assert!(a.contains(key), "missing {key}");
    }
    let rows = body(&a);
    assert_eq!(rows[0], "index,value,steps,boundary_correction");
    assert_eq!(rows.len(), 301);
    assert!(!a.contains('\r'));
}

#[test]
fn transit_samples_for_a_family() {
    let dir = tempfile::tempdir().unwrap();
    let out = transit(dir.path(), &["sample", "--family", "sine", "--eps", "0.05", "--n", "200", "--out", "t.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let rows = body(&text);
    assert_eq!(rows[0], "seed,epsilon,x0,a,tau_raw,tau_rescaled,exited_left");
    assert_eq!(rows.len(), 201);
}

#[test]
fn single_eps_convergence_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = transit(dir.path(), &["converge", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("converge.eps"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "version = 1\nsurprise = true\n").unwrap();
    assert_eq!(transit(dir.path(), &["constants", "--config", "bad.toml"]).status.code(), Some(2));
    std::fs::write(dir.path().join("v2.toml"), "version = 2\n").unwrap();
    assert_eq!(transit(dir.path(), &["constants", "--config", "v2.toml"]).status.code(), Some(2));
    assert_eq!(transit(dir.path(), &["spectrum", "--lambda", "1"]).status.code(), Some(2));
}

#[test]
fn laplace_at_zero_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = transit(dir.path(), &["laplace", "--d", "3", "--mu", "0", "--lambda", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = body(&text);
    assert_eq!(rows[0], "lambda,phi,ln_phi,err_estimate,converged");
    let phi: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(phi, 1.0);
}

#[test]
fn constants_for_the_quartic() {
    let dir = tempfile::tempdir().unwrap();
    assert!(transit(dir.path(), &["constants", "--d", "4", "--mu", "0", "--out", "c.json"]).status.success());
    let v = json(&dir.path().join("c.json"));
    let k = &v["result"]["constants"];
    assert!((k["c23"].as_f64().unwrap() - 1.6693).abs() < 2e-4);
    assert!((k["c13"].as_f64().unwrap() - 0.5432).abs() < 2e-4);
    assert_eq!(v["provenance"]["command"], "constants");
}

#[test]
fn corrupted_constants_fail_the_agreement_check() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "version = 1\n[constants]\nperturbation = 1e-4\n").unwrap();
    let out = transit(dir.path(), &["constants", "--config", "c.toml", "--out", "c.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&dir.path().join("c.json"))["result"]["pass"], false);
}

#[test]
fn spectrum_matches_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    assert!(transit(dir.path(), &["spectrum", "--d", "3", "--mu", "0", "--out", "s.json"]).status.success());
    let v = json(&dir.path().join("s.json"));
    let o = &v["result"]["oracle"];
    assert_eq!(o["pass"], true);
    assert!(o["rel_err"].as_f64().unwrap() < 1e-6);
    let l0 = v["result"]["spectrum"]["lambda0"].as_f64().unwrap();
    assert!((l0 - 0.3541232444531045 / 2.0).abs() < 1e-9);
}

#[test]
fn validate_is_deterministic_and_catches_corruption() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("v.toml"), "version = 1\n[validate]\ncriteria = [3, 4, 7]\n").unwrap();
    for name in ["r1.json", "r2.json"] {
        let out = transit(dir.path(), &["validate", "--config", "v.toml", "--out", name]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let r1 = std::fs::read(dir.path().join("r1.json")).unwrap();
    assert_eq!(r1, std::fs::read(dir.path().join("r2.json")).unwrap());
    let v = json(&dir.path().join("r1.json"));
    assert_eq!(v["result"]["pass"], true);
    assert_eq!(v["result"]["criteria"].as_array().unwrap().len(), 3);

    std::fs::write(dir.path().join("bad.toml"), "version = 1\n[validate]\ncriteria = [3]\nconstants_perturbation = 1e-4\n").unwrap();
    let out = transit(dir.path(), &["validate", "--config", "bad.toml", "--out", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("criterion  3 FAIL"));
}

#[test]
fn density_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = transit(dir.path(), &["density", "--d", "4", "--mu", "0", "--out", "f.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let rows = body(&text);
    assert_eq!(rows[0], "mu,t,f,F,S,neg_log_s");
    assert_eq!(rows.len(), 4002);
    let s = json(&dir.path().join("f.summary.json"));
    let m = &s["result"][0];
    assert!((m["mass"].as_f64().unwrap() - 1.0).abs() < 1e-4);
    assert!((m["mean"].as_f64().unwrap() - 1.64313).abs() < 1e-3);
}

#[test]
fn scale_function_view() {
    let dir = tempfile::tempdir().unwrap();
    let out = transit(dir.path(), &["density", "--view", "scale", "--mu", "-1,0,1", "--out", "s.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let rows = body(&text);
    assert_eq!(rows[0], "mu,y,s,w");
    assert_eq!(rows.len(), 1 + 3 * 601);
    // s(0) = 0 and w(0) = 1 for every tilt.
    for r in rows.iter().skip(1).filter(|r| r.split(',').nth(1) == Some("0.0")) {
        let v: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[2].abs() < 1e-12 && (v[3] - 1.0).abs() < 1e-9, "{r}");
    }
}
