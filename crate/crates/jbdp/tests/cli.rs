use std::path::Path;
use std::process::{Command, Output};

fn jbdp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jbdp"))
        .args(args)
        .current_dir(dir)
        .env_remove("JBDP_OUT_DIR")
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn clean_instance_with_true_diagonalizer_has_zero_bound() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = jbdp(
        &[
            "generate",
            "--tau",
            "3,3,3",
            "--m",
            "16",
            "--xi",
            "0",
            "--seed",
            "3",
            "--out",
            "clean.json",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let b = jbdp::format::load_instance(&d.join("clean.json")).unwrap();
    let w = jbdp::format::DiagonalizerFile {
        tau: b.tau.clone(),
        w: b.w_true.clone(),
        init: "truth".into(),
        objective: 0.0,
        converged: true,
    };
    jbdp::format::save_diagonalizer(&d.join("w.json"), &w).unwrap();
    let out = jbdp(
        &[
            "analyze",
            "--instance",
            "clean.json",
            "--w",
            "w.json",
            "--out",
            "rep.json",
        ],
        d,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rep = json(&d.join("rep.json"));
    assert!(rep["r_tilde"].as_f64().unwrap() <= 1e-12);
    assert_eq!(rep["delta_a"].as_f64(), Some(0.0));
    assert!(rep["eps_ub"].as_f64().unwrap() <= 1e-10);
    assert_eq!(rep["instance_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn noisy_instance_solved_and_analyzed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(jbdp(
        &[
            "generate",
            "--xi",
            "1e-12",
            "--seed",
            "5",
            "--out",
            "noisy.json"
        ],
        d
    )
    .status
    .success());
    let out = jbdp(
        &[
            "solve",
            "--instance",
            "noisy.json",
            "--warm-start",
            "--out",
            "w.json",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = jbdp(
        &[
            "analyze",
            "--instance",
            "noisy.json",
            "--w",
            "w.json",
            "--out",
            "rep.json",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&d.join("rep.json"));
    assert_eq!(rep["condition_holds"], true);
    assert!(rep["error"].as_f64().unwrap() <= rep["eps_ub"].as_f64().unwrap());

    let out = jbdp(
        &[
            "analyze",
            "--instance",
            "noisy.json",
            "--solve",
            "--warm-start",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["init"], "warm");
    assert!(rep["solver"]["iterations"].is_u64());
}

#[test]
fn inapplicable_bound_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(jbdp(
        &[
            "generate", "--tau", "2,2", "--m", "3", "--xi", "0.5", "--seed", "1", "--out",
            "big.json"
        ],
        d
    )
    .status
    .success());
    let b = jbdp::format::load_instance(&d.join("big.json")).unwrap();
    let far = jbdp_core::random::member_w(&mut jbdp_core::random::rng(9), &b.tau);
    let w = jbdp::format::DiagonalizerFile {
        tau: b.tau.clone(),
        w: far,
        init: "random".into(),
        objective: 0.0,
        converged: false,
    };
    jbdp::format::save_diagonalizer(&d.join("w.json"), &w).unwrap();
    let out = jbdp(&["analyze", "--instance", "big.json", "--w", "w.json"], d);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["condition_holds"], false);
    assert!(rep["eps_ub"].is_null());
}

#[test]
fn malformed_instance_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("bad.json"),
        "{\"format\": \"jbdp\", \"version\": 1, \"kind\": \"inst",
    )
    .unwrap();
    let out = jbdp(&["analyze", "--instance", "bad.json", "--solve"], d);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parse error at byte offset"), "{err}");

    let out = jbdp(&["analyze", "--instance", "missing.json"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    assert!(jbdp(
        &[
            "generate",
            "--tau",
            "1,2",
            "--m",
            "2",
            "--out",
            "small.json"
        ],
        d
    )
    .status
    .success());
    assert!(jbdp(
        &["generate", "--tau", "3", "--m", "2", "--out", "three.json"],
        d
    )
    .status
    .success());
    assert!(jbdp(
        &["solve", "--instance", "three.json", "--out", "w3.json"],
        d
    )
    .status
    .success());
    let out = jbdp(
        &["analyze", "--instance", "small.json", "--w", "w3.json"],
        d,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn experiment_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec![
            "experiment",
            "vary-m",
            "--grid",
            "4,8,16",
            "--trials",
            "1",
            "--seed",
            "7",
            "--warm-start",
            "--gamma-samples",
            "5",
            "--out",
            out,
        ]
    };
    assert!(jbdp(&args("a.csv"), d).status.success());
    assert!(jbdp(&args("b.csv"), d).status.success());
    let a = std::fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 4);

    let out = jbdp(
        &[
            "experiment",
            "vary-noise",
            "--grid",
            "1e-12,1e-10",
            "--warm-start",
            "--format",
            "jsonl",
            "--plot",
            "p.csv",
        ],
        d,
    );
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
    assert!(std::fs::read_to_string(d.join("p.csv"))
        .unwrap()
        .starts_with("x,error,eps_ub,eps_berr\n"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_jbdp"))
        .args([
            "experiment",
            "single",
            "--warm-start",
            "--gamma-samples",
            "3",
        ])
        .env("JBDP_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("single.csv").exists());
    assert!(dir.path().join("single_plot.csv").exists());
}
