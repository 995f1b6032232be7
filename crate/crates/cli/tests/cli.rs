use std::path::PathBuf;
use std::process::Command;

use eds_cli::{load_system_spec, Overrides};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn eds(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_eds")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut a = args.to_vec();
    a.push("--json");
    let (code, out, err) = eds(&a);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out} {err}"));
    (code, v)
}

#[test]
fn fixtures_load() {
    let s = load_system_spec(&fixture("liouville.eds"), &Overrides::default()).unwrap();
    assert_eq!(s.chart.dim(), 7);
    assert_eq!((s.f.len(), s.g.len()), (2, 2));
    assert_eq!((s.invariants.of_f.len(), s.invariants.of_g.len()), (2, 2));
    let w = load_system_spec(&fixture("wave.eds"), &Overrides::default()).unwrap();
    assert_eq!(w.chart.dim(), 5);
    for f in ["goursat_k2.eds", "sine_gordon.eds", "affine1.eds", "heisenberg.eds"] {
        load_system_spec(&fixture(f), &Overrides::default()).unwrap();
    }
}

#[test]
fn check_liouville() {
    let (code, v) = json(&["check", fixture("liouville.eds").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["results"]["class"], serde_json::json!([3, 2, 2]));
    assert_eq!(v["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn sine_gordon_fails() {
    let (code, v) = json(&["check", fixture("sine_gordon.eds").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["results"]["invariant_counts"]["F"], 1);
}

#[test]
fn missing_invariants_are_indeterminate() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("wave.eds")).unwrap();
    let stripped: String = text.lines().filter(|l| !l.starts_with("invariant")).map(|l| format!("{l}\n")).collect();
    let p = dir.path().join("w.eds");
    std::fs::write(&p, stripped).unwrap();
    let (code, _, _) = eds(&["check", p.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn symmetries_wave() {
    let (code, v) = json(&["symmetries", fixture("wave.eds").to_str().unwrap()]);
    assert_eq!(code, 0);
    let fp = &v["results"]["derived_tangential"]["F"]["fingerprint"];
    assert_eq!(fp["dim"], 1);
    assert_eq!(fp["abelian"], true);
    assert_eq!(v["results"]["system_symmetries"], serde_json::json!(["d/dz"]));
}

#[test]
fn undeclared_symbol_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.eds");
    std::fs::write(&p, "eds-spec 1\ncoordinates = x y\nF = d/dx + w*d/dy\nG = d/dy\n").unwrap();
    let (code, _, err) = eds(&["check", p.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("'w'") && err.contains("line 3"), "{err}");
}

#[test]
fn bad_arguments() {
    assert_eq!(eds(&["frobnicate"]).0, 3);
    assert_eq!(eds(&["check"]).0, 3);
    assert_eq!(eds(&["check", "/nonexistent.eds"]).0, 3);
    assert_eq!(eds(&["lift", fixture("liouville.eds").to_str().unwrap(), "--grid", "a"]).0, 3);
    // no curves for liouville in the file or on the command line
    assert_eq!(eds(&["lift", fixture("liouville.eds").to_str().unwrap()]).0, 3);
}

#[test]
fn reports_are_reproducible() {
    let f = fixture("goursat_k2.eds");
    let a = eds(&["symmetries", f.to_str().unwrap(), "--json", "--seed", "9"]);
    let b = eds(&["symmetries", f.to_str().unwrap(), "--json", "--seed", "9"]);
    assert_eq!(a.0, 0);
    assert_eq!(a.1, b.1);
}

#[test]
fn lift_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let (code, _, err) = eds(&[
        "lift",
        fixture("liouville.eds").to_str().unwrap(),
        "--gamma1",
        "u,u",
        "--gamma2",
        "v,v",
        "--grid",
        "21x21",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("u,v,x,y,z,p,q,r,t\n"));
    assert_eq!(csv.lines().count(), 1 + 21 * 21);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.csv.json")).unwrap()).unwrap();
    assert!(side["results"]["residual"]["max"].as_f64().unwrap() < 1e-6);
    assert_eq!(side["results"]["ode_tolerance"]["atol"], 1e-9);
}

#[test]
fn prolong_wave() {
    let (code, v) = json(&["prolong", fixture("wave.eds").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["prolonged_class"], serde_json::json!([3, 2, 2]));
}

#[test]
fn reciprocal_affine_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let (code, _, err) = eds(&[
        "reciprocal",
        fixture("affine1.eds").to_str().unwrap(),
        "--grid",
        "5x5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("x1,x2,Y1_x1,Y1_x2,Y2_x1,Y2_x2\n"));
    assert_eq!(csv.lines().count(), 26);
}

#[test]
fn invariants_command() {
    let (code, v) = json(&["invariants", fixture("goursat_k2.eds").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["invariant_counts"], serde_json::json!({"F": 2, "G": 2}));
    let certs: Vec<&str> = v["checks"].as_array().unwrap().iter().filter_map(|c| c["certification"].as_str()).collect();
    assert!(certs.contains(&"numeric") && certs.contains(&"symbolic"));
}
