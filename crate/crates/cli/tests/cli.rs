use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sbjo_core::algebra::rng_from_seed;
use sbjo_core::preservers::{LinearMap, PreserverSpec};
use sbjo_core::{BlockStructure, Element, Tolerance};
use serde_json::Value;
use tempfile::TempDir;

fn sbjo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbjo"))
        .args(args)
        .output()
        .expect("spawn sbjo")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8")
}

fn write(dir: &TempDir, name: &str, e: &Element) -> PathBuf {
    let p = dir.path().join(name);
    e.write_file(&p).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn m2() -> BlockStructure {
    BlockStructure::new(vec![2]).unwrap()
}

#[test]
fn check_orthogonal_pair_reports_top_vector() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.json", &Element::real_diagonal(&m2(), &[2.0, 1.0]).unwrap());
    let y = write(&dir, "y.json", &Element::real_diagonal(&m2(), &[0.0, 1.0]).unwrap());
    let o = sbjo(&["check", "--x", s(&x), "--y", s(&y), "--json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "orthogonal");
    assert_eq!(v["witness"]["kind"], "vector");
    let zeta = v["witness"]["zeta"].as_array().unwrap();
    let first = zeta[0].as_array().unwrap();
    let modulus = first[0].as_f64().unwrap().hypot(first[1].as_f64().unwrap());
    assert!((modulus - 1.0).abs() < 1e-12);
}

#[test]
fn check_non_orthogonal_pair_writes_violation() {
    let dir = TempDir::new().unwrap();
    let e = Element::real_diagonal(&m2(), &[1.0, 0.0]).unwrap();
    let x = write(&dir, "x.json", &e);
    let z_out = dir.path().join("z.json");
    let o = sbjo(&["check", "--x", s(&x), "--y", s(&x), "--z-out", s(&z_out)]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict: not_orthogonal"));
    let z = Element::read_file(&z_out).unwrap();
    let moved = e.add(&e.mul(&z).unwrap()).unwrap();
    assert!(moved.norm() < e.norm() * (1.0 - 1e-9));
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dims\":[2],\"blocks\":[[[[1,0]]]]}").unwrap();
    let o = sbjo(&["check", "--x", s(&bad), "--y", s(&bad)]);
    assert_eq!(code(&o), 64);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&sbjo(&["classify", "--x", s(&missing)])), 64);
    assert_eq!(code(&sbjo(&["rand", "--structure", "0,2"])), 64);
    assert_eq!(code(&sbjo(&["no-such-command"])), 64);
    assert_eq!(code(&sbjo(&["classify", "--x", s(&bad), "--tol-norm", "0.5"])), 64);
}

#[test]
fn rand_is_deterministic_and_honours_kind() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = sbjo(&["rand", "--structure", "1,2,3", "--seed", "7", "--out", s(p)]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let u = dir.path().join("u.json");
    assert_eq!(code(&sbjo(&["rand", "--structure", "2,3", "--kind", "unitary", "--out", s(&u)])), 0);
    let u = Element::read_file(&u).unwrap();
    let gap = u.mul(&u.adjoint()).unwrap().sub(&Element::identity(u.structure())).unwrap();
    assert!(gap.norm() < 1e-12);

    let r = dir.path().join("r.json");
    assert_eq!(code(&sbjo(&["rand", "--structure", "3,3", "--kind", "rank1", "--out", s(&r)])), 0);
    let o = sbjo(&["classify", "--x", s(&r), "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rank"], 1);
}

#[test]
fn verify_accepts_a_sandwich_and_recover_refuses_transpose() {
    let dir = TempDir::new().unwrap();
    let st = BlockStructure::new(vec![1, 2]).unwrap();
    let spec = PreserverSpec::random_sandwich(&st, &mut rng_from_seed(3));
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let o = sbjo(&["preserver", "verify", "--spec", s(&spec_path), "--structure", "1,2", "--budget", "200"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let map = LinearMap::from_map(&m2(), |a| Ok(a.transpose())).unwrap();
    let map_path = dir.path().join("map.json");
    std::fs::write(&map_path, map.to_json()).unwrap();
    let o = sbjo(&["preserver", "recover", "--map", s(&map_path)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("not a sandwich map"));
}

#[test]
fn recover_inverts_a_planted_sandwich() {
    let dir = TempDir::new().unwrap();
    let st = BlockStructure::new(vec![2, 2]).unwrap();
    let spec = PreserverSpec::random_sandwich(&st, &mut rng_from_seed(11));
    let tol = Tolerance::default();
    let map = LinearMap::from_map(&st, |a| spec.apply(a, &tol)).unwrap();
    let map_path = dir.path().join("map.json");
    std::fs::write(&map_path, map.to_json()).unwrap();
    let out = dir.path().join("recovered.json");
    let o = sbjo(&["preserver", "recover", "--map", s(&map_path), "--spec-out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let recovered: PreserverSpec = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let probe = Element::real_diagonal(&st, &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let a = spec.apply(&probe, &tol).unwrap();
    let b = recovered.apply(&probe, &tol).unwrap();
    assert!(a.sub(&b).unwrap().norm() < 1e-8);
}

#[test]
fn suite_with_loose_tolerance_fails_deterministically() {
    let run = || sbjo(&["suite", "--criteria", "rank", "--tol-norm", "0.5"]);
    let (a, b) = (run(), run());
    assert_eq!(code(&a), 1);
    assert_eq!(code(&b), 1);
    let lines = |o: &Output| -> Vec<String> {
        stdout(o).lines().filter(|l| l.starts_with("criterion")).map(String::from).collect()
    };
    assert_eq!(lines(&a), lines(&b));
    assert_eq!(lines(&a).len(), 2);
    assert!(lines(&a).iter().all(|l| l.contains("FAIL")));
}

#[test]
fn graph_writes_dot() {
    let o = sbjo(&["graph", "--structure", "2", "--sample", "6", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    let dot = stdout(&o);
    assert!(dot.starts_with("graph "));
    assert!(dot.contains("rank="));
    let d = sbjo(&["graph", "--structure", "2", "--sample", "6", "--seed", "1", "--mode", "directed"]);
    assert!(stdout(&d).starts_with("digraph "));
    assert_eq!(stdout(&sbjo(&["graph", "--structure", "2", "--sample", "6", "--seed", "1"])), dot);
}
