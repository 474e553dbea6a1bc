use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spaceform"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> (i32, String) {
    let Output { status, stdout, stderr } = bin().args(args).output().expect("spawn spaceform");
    let mut text = String::from_utf8_lossy(&stdout).into_owned();
    text.push_str(&String::from_utf8_lossy(&stderr));
    (status.code().expect("exit code"), text)
}

fn classify(name: &str) -> (i32, String) {
    let path = fixture(name);
    run(&["classify", path.to_str().unwrap()])
}

#[test]
fn accepted_fixtures_exit_zero() {
    let (code, out) = classify("accept_screw_q4.json");
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("L^M = Plane(4)"), "{out}");
    let (code, out) = classify("accept_trivial.json");
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("L^M = Plane\n"), "{out}");
    let (code, out) = classify("accept_lens.json");
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("L^M = S²(3,3)"), "{out}");
}

#[test]
fn rejected_fixtures_exit_two_and_name_the_condition() {
    let (code, out) = classify("reject_glide.json");
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("b1 violated: reflection in leaf stabilizer"), "{out}");
    let (code, out) = classify("reject_irrational.json");
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("b2 violated"), "{out}");
    let (code, out) = classify("reject_tilted.json");
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("a violated"), "{out}");
}

#[test]
fn usage_and_io_errors_exit_one() {
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["classify", "/nonexistent/spec.json"]).0, 1);
    assert_eq!(run(&["verify", "nosuchmap"]).0, 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"ambient\": \"euclidean3\",\n \"colour\": 1}").unwrap();
    let (code, out) = run(&["classify", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.contains("colour") && out.contains("line"), "{out}");
}

#[test]
fn verify_exit_codes() {
    let (code, out) = run(&["verify", "hopf", "--samples", "100"]);
    assert_eq!(code, 0, "{out}");
    let (code, out) = run(&["verify", "screw:3", "--samples", "20"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("2.00000"), "{out}");
    let (code, out) = run(&["verify", "pi4", "--samples", "20", "--tol-conformality", "1e-30"]);
    assert_eq!(code, 3, "{out}");
}

#[test]
fn catalog_report_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let (code, out) =
            run(&["catalog", "--filter", "neg-*", "--seed", "7", "--out-dir", dir.path().to_str().unwrap()]);
        assert_eq!(code, 0, "{out}");
    }
    let ja = std::fs::read(a.path().join("report.json")).unwrap();
    let jb = std::fs::read(b.path().join("report.json")).unwrap();
    assert!(!ja.is_empty());
    assert_eq!(ja, jb);
    assert!(a.path().join("report.txt").exists());
}

#[test]
fn plotdata_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let (code, msg) = run(&["plotdata", "screw:2", "--grid", "plane:10x10", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{msg}");
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,x3,lambda,conf_defect,harm_residual"));
    assert_eq!(lines.count(), 100);
}
