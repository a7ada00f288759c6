use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparse-kacrice"))
        .args(args)
        .env_remove("SPARSE_KACRICE_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sparse-kacrice-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn analyze_two_term() {
    let v = json(&run(&["analyze", "--input", &fixture("two_term.json")]));
    assert_eq!(v["schema"], 1);
    assert_eq!(v["route"], "x");
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!(v["cells"].as_u64().unwrap() > 0);
}

#[test]
fn analyze_both_routes_and_box() {
    let v = json(&run(&[
        "analyze",
        "--input",
        &fixture("unit_square.json"),
        "--route",
        "both",
        "--tol",
        "1e-6",
    ]));
    assert!(v["abs_diff"].as_f64().unwrap() < 1e-3);
    let v = json(&run(&[
        "analyze",
        "--input",
        &fixture("two_term.json"),
        "--box",
        "-40,0",
    ]));
    assert!((v["value"].as_f64().unwrap() - 0.25).abs() < 1e-6);
    let v = json(&run(&[
        "--threads",
        "1",
        "analyze",
        "--input",
        &fixture("two_term.json"),
        "--box",
        "40",
    ]));
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn malformed_json_exits_two_with_location() {
    let out = run(&["analyze", "--input", &fixture("malformed.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("column"), "{err}");
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(
        run(&["analyze", "--input", "/nonexistent.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "analyze",
            "--input",
            &fixture("two_term.json"),
            "--box",
            "1,2,3"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["mc", "--input", &fixture("unit_square.json")])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn nonconvergence_exits_three() {
    let out = run(&[
        "analyze",
        "--input",
        &fixture("unit_square.json"),
        "--tol",
        "1e-14",
        "--max-evals",
        "500",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("partial value"));
    // A zero weight for the new exponent is an input error.
    let out = run(&[
        "witness",
        "--input",
        &fixture("two_term.json"),
        "--a0",
        "0.5",
        "--alpha0",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn psi_grid_unit_square_has_u_minus() {
    let csv = tmp("psi.csv");
    let v = json(&run(&[
        "psi-grid",
        "--input",
        &fixture("unit_square.json"),
        "--a0",
        "0.5,0.5",
        "--resolution",
        "21",
        "--output",
        csv.to_str().unwrap(),
    ]));
    assert!(v["u_minus"].as_u64().unwrap() > 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("p1,p2,"));
    assert!(text.contains("U_minus"));
    // Deterministic output.
    let again = run(&[
        "psi-grid",
        "--input",
        &fixture("unit_square.json"),
        "--a0",
        "0.5,0.5",
        "--resolution",
        "21",
    ]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn density_grid_csv() {
    let out = run(&[
        "density-grid",
        "--input",
        &fixture("two_term.json"),
        "--bounds",
        "-2,2",
        "--resolution",
        "5",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,density");
    assert_eq!(lines.len(), 6);
    let mid: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
    assert!((mid - 0.5 / std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn witness_and_ray() {
    let v = json(&run(&[
        "witness",
        "--input",
        &fixture("unit_square.json"),
        "--a0",
        "0.5,0.5",
    ]));
    assert!(v["eval"]["psi"].as_f64().unwrap() < 1.0);
    let v = json(&run(&[
        "ray",
        "--input",
        &fixture("two_term.json"),
        "--a0",
        "3",
        "--dir",
        "1",
        "--steps",
        "4",
    ]));
    assert_eq!(v["scan"]["hypothesis"]["holds"], true);
    assert_eq!(v["scan"]["samples"].as_array().unwrap().len(), 5);
}

#[test]
fn monte_carlo() {
    let v = json(&run(&[
        "mc",
        "--input",
        &fixture("three_term.json"),
        "--samples",
        "5000",
        "--seed",
        "3",
    ]));
    assert_eq!(v["samples"], 5000);
    assert!(v["mean"].as_f64().unwrap() > 0.0 && v["stderr"].as_f64().unwrap() > 0.0);
    let w = json(&run(&[
        "mc",
        "--input",
        &fixture("three_term.json"),
        "--samples",
        "5000",
        "--seed",
        "3",
        "--interval",
        "-20,20",
    ]));
    assert_eq!(v["mean"], w["mean"]);
}

#[test]
fn algebra_round_trip() {
    let out = run(&["algebra", "kostlan", "--m", "2", "--d", "1"]);
    assert!(out.status.success());
    let path = tmp("k21.json");
    std::fs::write(&path, &out.stdout).unwrap();
    let p = path.to_str().unwrap();
    let v = json(&run(&["analyze", "--input", p, "--tol", "1e-6"]));
    assert!((v["value"].as_f64().unwrap() - std::f64::consts::PI / 8.0).abs() < 1e-4);
    let t = json(&run(&[
        "algebra",
        "tensor",
        "--left",
        &fixture("two_term.json"),
        "--right",
        &fixture("two_term.json"),
    ]));
    assert_eq!(t["dim"], 2);
    let a = json(&run(&[
        "algebra",
        "aronszajn",
        "--left",
        &fixture("two_term.json"),
        "--right",
        &fixture("two_term.json"),
    ]));
    assert_eq!(a["support"].as_array().unwrap().len(), 3);
    let pw = json(&run(&[
        "algebra",
        "power",
        "--input",
        &fixture("two_term.json"),
        "--d",
        "3",
    ]));
    assert_eq!(pw["support"].as_array().unwrap().len(), 4);
    assert_eq!(pw["schema"], 1);
}

#[test]
fn bkk_and_selftest() {
    let v = json(&run(&[
        "bkk",
        "--input",
        &fixture("unit_square.json"),
        "--tol",
        "1e-6",
    ]));
    assert!(v["abs_diff"].as_f64().unwrap() < 1e-3);
    assert_eq!(v["n_factorial_vol"], 2.0);
    let out = run(&["selftest"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
