use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use npspectra::certify::{Certificate, Verdict};
use npspectra::inversion::{IdentityKind, IdentityReport};

const BIN: &str = env!("CARGO_BIN_EXE_npspectra");

fn write_shape(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn sphere(dir: &Path) -> PathBuf {
    write_shape(
        dir,
        "sphere.json",
        r#"{"dimension":3,"kind":"sphere","params":{"radius":1.0},"refinement":8}"#,
    )
}

fn dumbbell(dir: &Path) -> PathBuf {
    write_shape(
        dir,
        "dumbbell.json",
        r#"{"dimension":3,"kind":"star3d","params":{"coeffs":[1.0,0.0,0.7]},"refinement":8}"#,
    )
}

fn ellipse(dir: &Path) -> PathBuf {
    write_shape(
        dir,
        "ellipse.json",
        r#"{"dimension":2,"kind":"ellipse","params":{"a":2.0,"b":1.0},"refinement":96}"#,
    )
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn spectrum_csv_is_descending_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let shape = sphere(dir.path());
    let out = dir.path().join("eig.csv");
    let plot = dir.path().join("eig.dat");
    let first = run(&["spectrum", "--shape", s(&shape), "--out", s(&out), "--plot", s(&plot)]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue"));
    let values: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 1280);
    assert!((values[0] - 0.5).abs() < 1e-3);
    assert!(values.windows(2).all(|w| w[0] >= w[1]));

    let data = fs::read_to_string(&plot).unwrap();
    assert!(data.lines().skip(1).all(|l| l.split(' ').count() == 2));

    let again = run(&["spectrum", "--shape", s(&shape)]);
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn spectrum_with_vectors_adds_residual_column() {
    let dir = tempfile::tempdir().unwrap();
    let shape = ellipse(dir.path());
    let out = run(&["spectrum", "--shape", s(&shape), "--vectors", "--count", "5"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("index,eigenvalue,residual\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn verify_energy_on_sphere_passes() {
    let dir = tempfile::tempdir().unwrap();
    let shape = sphere(dir.path());
    let out = run(&["verify", "--identity", "energy", "--shape", s(&shape), "--center", "0,0,0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: IdentityReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.identity, IdentityKind::EnergyInterior);
    assert!(report.residual <= 1e-2);
}

#[test]
fn verify_failure_and_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let shape = ellipse(dir.path());
    let plot = dir.path().join("res.dat");
    let out = run(&[
        "verify", "--identity", "np_transform", "--shape", s(&shape), "--center", "0.1,0.2",
        "--density", "random", "--ladder", "32,64", "--plot", s(&plot),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let reports: Vec<IdentityReport> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(fs::read_to_string(&plot).unwrap().lines().count(), 3);

    let out = run(&[
        "verify", "--identity", "plemelj", "--shape", s(&shape), "--tolerance", "0",
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn conformal_2d_requires_mean_zero() {
    let dir = tempfile::tempdir().unwrap();
    let shape = ellipse(dir.path());
    let base = ["verify", "--identity", "conformal", "--shape", s(&shape), "--density", "random"];
    assert_eq!(code(&run(&base)), 1);
    let mut args = base.to_vec();
    args.push("--mean-zero");
    assert_eq!(code(&run(&args)), 0);
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["certify", "--shape", s(&dumbbell(dir.path())), "--center", "auto"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let cert: Certificate = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedNegative);
    assert!(cert.form_sum.unwrap() < 0.0);
    assert!(cert.spectral_confirmation.unwrap().has_negative());

    let out = run(&["certify", "--shape", s(&sphere(dir.path())), "--no-spectra"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn invert_writes_node_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["invert", "--shape", s(&sphere(dir.path())), "--center", "0.1,0,0"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("index,x,y,z,nx,ny,nz,weight\n"));
    assert_eq!(text.lines().count(), 1281);
}

#[test]
fn curvature_reports_dumbbell_neck() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["curvature", "--shape", s(&dumbbell(dir.path())), "--center", "0,0,1"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["gaussian_min"]["value"].as_f64().unwrap() < 0.0);
    assert!(v["concavity"]["min_value"].as_f64().unwrap() < 0.0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_shape(dir.path(), "bad.json", r#"{"dimension":3,"kind":"cube"}"#);
    assert_eq!(code(&run(&["spectrum", "--shape", s(&bad)])), 1);
    assert_eq!(code(&run(&["spectrum", "--shape", "/nonexistent.json"])), 1);
    assert_eq!(code(&run(&["spectrum", "--bogus"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    let shape = sphere(dir.path());
    assert_eq!(code(&run(&["invert", "--shape", s(&shape), "--center", "1,0"])), 1);
    // center on the boundary
    assert_eq!(code(&run(&["invert", "--shape", s(&shape), "--center", "1,0,0"])), 1);

    let out = Command::new(BIN)
        .args(["spectrum", "--shape", s(&shape), "--count", "1"])
        .env("NP_SPECTRA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    let out = Command::new(BIN)
        .args(["spectrum", "--shape", s(&shape), "--count", "1"])
        .env("NP_SPECTRA_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}
