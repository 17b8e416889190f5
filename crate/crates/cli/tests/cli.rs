use std::path::Path;
use std::process::Command;

use cpr_core::io::{load_signal, save_signal};
use cpr_core::{conj_class_distance, ComplexSignal, Complex64};
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("not one JSON document ({e}): {}", self.stdout))
    }
}

fn cpr_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cpr"));
    cmd.current_dir(dir).args(args).env_remove("CPR_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn cpr(dir: &Path, args: &[&str]) -> Run {
    cpr_env(dir, args, &[])
}

fn ok(dir: &Path, args: &[&str]) -> Run {
    let r = cpr(dir, args);
    assert_eq!(r.code, 0, "cpr {args:?}\nstdout: {}\nstderr: {}", r.stdout, r.stderr);
    r
}

fn motivating(dir: &Path) -> &'static str {
    std::fs::write(
        dir.join("mot.json"),
        r#"{"m": 2, "n": 3, "field": "real", "columns": [[1, 0], [0, 1], [1, 1]]}"#,
    )
    .unwrap();
    "mot.json"
}

fn signal(entries: &[(f64, f64)]) -> ComplexSignal {
    ComplexSignal::new(entries.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
}

#[test]
fn gen_writes_frames_and_rejects_bad_dimensions() {
    let d = TempDir::new().unwrap();
    let r = ok(d.path(), &["gen", "--m", "3", "--n", "6", "--seed", "7", "-o", "f.json"]);
    assert!(r.stdout.contains("3x6"));
    assert!(!r.stdout.contains("note:"));
    let f: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("f.json")).unwrap()).unwrap();
    assert_eq!(f["columns"].as_array().unwrap().len(), 6);

    let r = ok(d.path(), &["gen", "--m", "3", "--n", "8", "--cone", "-o", "cone.json", "--json"]);
    assert_eq!(r.json()["kind"], "cone");

    let r = ok(d.path(), &["gen", "--m", "4", "--n", "8", "-o", "small.csv"]);
    assert!(r.stdout.contains("below the generic size 10"));
    assert!(std::fs::read_to_string(d.path().join("small.csv")).unwrap().lines().count() == 4);

    assert_eq!(cpr(d.path(), &["gen", "--m", "2", "--n", "1", "-o", "x.json"]).code, 2);
    assert_eq!(cpr(d.path(), &["gen", "--m", "2", "--n", "4", "--cone", "-o", "x.json"]).code, 2);
    assert_eq!(cpr(d.path(), &["gen", "--m", "2"]).code, 2);
}

#[test]
fn certify_motivating_frame() {
    let d = TempDir::new().unwrap();
    let f = motivating(d.path());
    let r = ok(d.path(), &["certify", f]);
    assert!(r.stdout.starts_with("CertifiedCPR (Det2)"), "{}", r.stdout);
    let j = ok(d.path(), &["certify", f, "--json"]).json();
    assert_eq!(j["verdict"], "CertifiedCPR");
    assert_eq!(j["method"], "Det2");
    assert!((j["det_value"].as_f64().unwrap().abs() - 2.0).abs() <= 1e-12);
    assert!(j["witness_file"].is_null());
}

#[test]
fn every_rejection_comes_with_a_confirmed_witness() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["gen", "--m", "2", "--n", "2", "--seed", "1", "-o", "a.json"]);
    ok(p, &["gen", "--m", "3", "--n", "5", "--seed", "2", "-o", "b.json"]);
    ok(p, &["gen", "--m", "3", "--n", "8", "--cone", "-o", "c.json"]);
    ok(p, &["gen", "--m", "4", "--n", "8", "--seed", "3", "-o", "d.csv"]);
    let cases: [(&str, &[&str], &str); 4] = [
        ("a.json", &[], "TooFewVectors"),
        ("b.json", &[], "KernelWitness"),
        ("c.json", &[], "KernelWitness"),
        ("d.csv", &["--budget", "500", "--seed", "1"], "SearchWitness"),
    ];
    for (frame, extra, method) in cases {
        let mut args = vec!["certify", frame, "--json"];
        args.extend_from_slice(extra);
        let j = ok(p, &args).json();
        assert_eq!(j["verdict"], "NotCPR", "{frame}");
        assert_eq!(j["method"], method, "{frame}");
        let wf = j["witness_file"].as_str().unwrap().to_string();
        assert!(p.join(&wf).exists());
        let m = ok(p, &["measure", frame, &wf, "--json"]).json();
        assert_eq!(m["confirmed"], true, "{frame}: {m}");
        assert!(m["relative_gap"].as_f64().unwrap() <= 1e-9);
        assert!(m["relative_distance"].as_f64().unwrap() >= 0.05);
    }
}

#[test]
fn four_by_eight_is_undecided_without_search() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["gen", "--m", "4", "--n", "8", "--seed", "5", "-o", "f.json"]);
    let j = ok(d.path(), &["certify", "f.json", "--json"]).json();
    assert_eq!(j["verdict"], "Undecided");
    assert_eq!(j["kernel_dim"], 2);
    assert!(j["trials"].is_null());
    let j = ok(d.path(), &["certify", "f.json", "--json", "--budget", "50"]).json();
    assert!(j["trials"]["restarts_run"].as_u64().unwrap() >= 1);
}

#[test]
fn json_output_is_deterministic() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["gen", "--m", "4", "--n", "9", "--seed", "11", "-o", "f.json"]);
    let runs = [
        vec!["certify", "f.json", "--budget", "300", "--seed", "4", "--json"],
        vec!["falsify", "f.json", "--budget", "300", "--seed", "4", "--json"],
    ];
    for args in runs {
        let a = ok(p, &args).stdout;
        let b = ok(p, &args).stdout;
        let c = cpr_env(p, &args, &[("CPR_THREADS", "3")]).stdout;
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
    save_signal(&p.join("x.json"), &signal(&[(1.0, 0.5), (-0.3, 2.0), (0.7, -1.1), (0.2, 0.0)])).unwrap();
    ok(p, &["measure", "f.json", "x.json", "-o", "b.json"]);
    let args = ["reconstruct", "f.json", "b.json", "--method", "altproj", "--restarts", "10", "--json"];
    assert_eq!(ok(p, &args).stdout, cpr_env(p, &args, &[("CPR_THREADS", "2")]).stdout);
}

#[test]
fn measure_then_reconstruct_round_trips() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["gen", "--m", "3", "--n", "6", "--seed", "7", "-o", "f.json"]);
    let x = signal(&[(0.3, -1.2), (2.0, 0.4), (-0.5, 0.9)]);
    save_signal(&p.join("x.json"), &x).unwrap();
    ok(p, &["measure", "f.json", "x.json", "-o", "b.json"]);
    let r = ok(p, &["reconstruct", "f.json", "b.json", "-o", "xh.json"]);
    assert!(r.stdout.contains("converged = true"));
    let xh = load_signal(&p.join("xh.json")).unwrap();
    assert!(conj_class_distance(&xh, &x).unwrap() <= 1e-8 * x.norm_sqr());
    // canonical representative: the largest coordinate comes out real and positive
    let canon = cpr_core::canonical_rep(&x, 1e-10);
    for (a, b) in xh.entries().iter().zip(canon.entries()) {
        assert!((a - b).norm() <= 1e-8 * x.norm(), "{a} vs {b}");
    }
    assert_eq!(xh.entries()[1].im, 0.0);

    // noisy measurements are saved with their noise level
    ok(p, &["measure", "f.json", "x.json", "--noise-sigma", "1e-6", "--seed", "3", "-o", "bn.json"]);
    let bn: Value = serde_json::from_str(&std::fs::read_to_string(p.join("bn.json")).unwrap()).unwrap();
    assert_eq!(bn["noise_sigma"], 1e-6);
    let j = ok(p, &["reconstruct", "f.json", "bn.json", "--json"]).json();
    assert!(j["lift_residual"].as_f64().unwrap() < 1e-4);
}

#[test]
fn altproj_recovers_a_four_by_ten_signal() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["gen", "--m", "4", "--n", "10", "--seed", "2", "-o", "f.json"]);
    let x = signal(&[(1.0, 0.0), (0.5, -0.5), (-1.5, 0.25), (0.0, 1.0)]);
    save_signal(&p.join("x.json"), &x).unwrap();
    ok(p, &["measure", "f.json", "x.json", "-o", "b.json"]);
    let j = ok(p, &["reconstruct", "f.json", "b.json", "--method", "altproj", "--strict", "-o", "xh.json", "--json"]).json();
    assert_eq!(j["converged"], true);
    let xh = load_signal(&p.join("xh.json")).unwrap();
    assert!(conj_class_distance(&xh, &x).unwrap() <= 1e-6 * x.norm_sqr());
}

#[test]
fn inconsistent_measurements_are_numerical_failures() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    let f = motivating(p);
    // |x1 + x2|^2 cannot reach 10 when |x1| = |x2| = 1
    std::fs::write(p.join("b.json"), r#"{"values": [1, 1, 10]}"#).unwrap();
    let r = cpr(p, &["reconstruct", f, "b.json", "--json"]);
    assert_eq!(r.code, 3);
    assert_eq!(r.json()["error"]["code"], "NotPsd");
    assert_eq!(cpr(p, &["reconstruct", f, "b.json", "--method", "altproj", "--restarts", "3", "--strict"]).code, 3);
    assert_eq!(cpr(p, &["reconstruct", f, "b.json", "--method", "altproj", "--restarts", "3"]).code, 0);
}

#[test]
fn input_problems_exit_with_two() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    let f = motivating(p);
    save_signal(&p.join("x3.json"), &signal(&[(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)])).unwrap();
    assert_eq!(cpr(p, &["measure", f, "x3.json"]).code, 2);

    std::fs::write(p.join("bad.json"), "{ not json").unwrap();
    let r = cpr(p, &["certify", "bad.json", "--json"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json()["error"]["code"], "E_JSON");

    std::fs::write(p.join("neg.json"), r#"{"values": [1, -1, 2]}"#).unwrap();
    assert_eq!(cpr(p, &["reconstruct", f, "neg.json"]).code, 2);

    std::fs::write(
        p.join("cx.json"),
        r#"{"m": 2, "n": 2, "field": "complex", "columns": [[[1, 0], [0, 1]], [[0, 0], [1, 0]]]}"#,
    )
    .unwrap();
    let r = cpr(p, &["certify", "cx.json"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("cpr strict"));

    assert_eq!(cpr(p, &["certify"]).code, 2);
    assert_eq!(cpr(p, &["frobnicate"]).code, 2);
    let r = cpr(p, &["certify", "--json"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json()["error"]["code"], "E_USAGE");
    assert_eq!(cpr_env(p, &["certify", f], &[("CPR_THREADS", "many")]).code, 2);
    assert_eq!(cpr_env(p, &["certify", f], &[("CPR_THREADS", "0")]).code, 0);
}

#[test]
fn witness_synthesis() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    let j = ok(p, &["witness", "--diag", "1,1,1", "-o", "w.json", "--json"]).json();
    assert!(j["witness"]["residual"].as_f64().unwrap() <= 1e-12);
    assert!(p.join("w.json").exists());
    ok(p, &["witness", "--diag", "2,0,1"]);
    ok(p, &["witness", "--diag2", "1,3"]);

    std::fs::write(p.join("h.json"), r#"{"m": 3, "rows": [[1, 2, 0], [2, -1, 0.5], [0, 0.5, 0.3]]}"#).unwrap();
    let j = ok(p, &["witness", "--matrix", "h.json", "--json"]).json();
    assert!(j["witness"]["residual"].as_f64().unwrap() <= 1e-10);

    std::fs::write(p.join("psd.json"), r#"{"m": 2, "rows": [[2, 1], [1, 2]]}"#).unwrap();
    let r = cpr(p, &["witness", "--matrix", "psd.json", "--json"]);
    assert_eq!(r.code, 3);
    assert_eq!(r.json()["error"]["code"], "DefiniteInput");

    assert_eq!(cpr(p, &["witness", "--diag", "1,2"]).code, 2);
    assert_eq!(cpr(p, &["witness", "--diag", "1,-1,1"]).code, 2);
    assert_eq!(cpr(p, &["witness"]).code, 2);
    assert_eq!(cpr(p, &["witness", "--diag", "1,1,1", "--diag2", "1,1"]).code, 2);
}

#[test]
fn falsify_reports_witness_or_budget() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["gen", "--m", "3", "--n", "5", "--seed", "9", "-o", "small.json"]);
    let j = ok(p, &["falsify", "small.json", "-o", "pair.json", "--json"]).json();
    assert_eq!(j["confirmed"], true);
    assert_eq!(ok(p, &["measure", "small.json", "pair.json", "--json"]).json()["confirmed"], true);

    let f = motivating(p);
    assert!(ok(p, &["falsify", f]).stdout.starts_with("no witness exists"));

    ok(p, &["gen", "--m", "4", "--n", "10", "--seed", "1", "-o", "big.json"]);
    let r = ok(p, &["falsify", "big.json", "--budget", "20"]);
    assert!(
        r.stdout.starts_with("no witness found in 20 restarts") || r.stdout.starts_with("no witness exists"),
        "{}",
        r.stdout
    );
}

#[test]
fn strict_reports() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["gen", "--m", "3", "--n", "6", "--seed", "4", "-o", "f.json"]);
    let r = ok(p, &["strict", "f.json"]);
    assert!(r.stdout.starts_with("StrictlyCPR; witness y = (1, i, 0)"), "{}", r.stdout);

    ok(p, &["gen", "--m", "2", "--n", "2", "--seed", "4", "-o", "g.json"]);
    assert_eq!(ok(p, &["strict", "g.json", "--json"]).json()["verdict"], "NotCPR");

    std::fs::write(
        p.join("cx.json"),
        r#"{"m": 2, "n": 3, "field": "complex", "columns": [[[1, 0], [0, 1]], [[1, 0], [0, 0]], [[0, 0], [1, 0]]]}"#,
    )
    .unwrap();
    let j = ok(p, &["strict", "cx.json", "--json"]).json();
    assert_eq!(j["verdict"], "ComplexPRCandidate");
    assert!(j["cpr_verdict"].is_null());
}
