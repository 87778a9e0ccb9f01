use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraisse-forge")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn le(carrier: &[&str], strict: &[(&str, &str)]) -> Value {
    let mut rel: Vec<Value> = carrier.iter().map(|x| json!([x, x])).collect();
    rel.extend(strict.iter().map(|(x, y)| json!([x, y])));
    json!({"signature": [{"name": "le", "arity": 2}], "carrier": carrier, "relations": {"le": rel}})
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn poset_ap_instance() -> Value {
    json!({
        "A": le(&["a"], &[]),
        "B1": le(&["a", "b"], &[("a", "b")]),
        "B2": le(&["a", "c"], &[("c", "a")]),
        "f1": {"a": "a"},
        "f2": {"map": {"a": "a"}, "kind": "embedding"},
    })
}

#[test]
fn urysohn_builtin_is_a_proof_of_failure() {
    let o = forge(&["check", "--property", "AEP2", "--age", "metric", "--builtin-instance", "urysohn", "--format", "text"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stdout(&o).contains("10 < 11"));
}

#[test]
fn poset_ap_witness_replays() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "i.json", &poset_ap_instance());
    let out = dir.path().join("cert.json");
    let o = forge(&["check", "--property", "AP", "--age", "posets", "--instance", &inst, "--budget", "6", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(cert["verdict"], "Witness");
    assert_eq!(cert["seed"], 0);
    assert_eq!(code(&forge(&["replay", out.to_str().unwrap()])), 0);
}

#[test]
fn tampered_certificate_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "i.json", &poset_ap_instance());
    let out = dir.path().join("cert.json");
    forge(&["check", "--property", "AP", "--age", "posets", "--instance", &inst, "--out", out.to_str().unwrap()]);
    let mut cert: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    cert["maps"]["g2"]["map"]["c"] = json!("b");
    let bad = write(dir.path(), "bad.json", &cert);
    assert_eq!(code(&forge(&["replay", &bad])), 2);
}

#[test]
fn graphs_hap_witness_over_a_point() {
    let dir = tempfile::tempdir().unwrap();
    let e = |l: &[&str]| {
        json!({"signature": [{"name": "E", "arity": 2}], "carrier": l,
               "relations": {"E": if l.len() == 2 { json!([[l[0], l[1]], [l[1], l[0]]]) } else { json!([]) }}})
    };
    let inst = json!({"A": e(&["a"]), "B": e(&["a", "b"]), "C": e(&["a", "c"]), "f": {"a": "a"}, "g": {"a": "a"}});
    let path = write(dir.path(), "hap.json", &inst);
    let o = forge(&["check", "--property", "HAP", "--age", "graphs", "--instance", &path]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn json_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut inst = poset_ap_instance();
    inst["B1"]["signature"][0]["arity"] = json!("two");
    let path = write(dir.path(), "bad.json", &inst);
    let o = forge(&["check", "--property", "AP", "--age", "posets", "--instance", &path]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("$.B1.signature[0].arity"), "{}", stderr(&o));
    let o = forge(&["check", "--property", "AP", "--age", "posets", "--instance", "/nonexistent.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&forge(&["--bogus"])), 1);
    assert_eq!(code(&forge(&["limit", "build", "--age", "no-such-age"])), 1);
    assert_eq!(code(&forge(&["check", "--property", "XYZ", "--age", "graphs", "--builtin-instance", "urysohn"])), 1);
    assert_eq!(code(&forge(&["check", "--property", "AP", "--age", "graphs", "--budget", "0", "--builtin-instance", "urysohn"])), 1);
    assert_eq!(code(&forge(&["--help"])), 0);
}

#[test]
fn limit_build_exit_codes() {
    let o = forge(&["limit", "build", "--age", "graphs", "--steps", "200", "--verify-k", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["extension_property"]["holds"], true);
    assert_eq!(v["seed"], 0);
    assert_eq!(code(&forge(&["limit", "build", "--age", "graphs", "--steps", "0", "--verify-k", "1"])), 2);
}

#[test]
fn limit_transcripts_are_byte_identical() {
    let args = ["limit", "build", "--age", "digraphs", "--steps", "40", "--seed", "9"];
    assert_eq!(forge(&args).stdout, forge(&args).stdout);
}

#[test]
fn upoly_exit_codes() {
    let o = forge(&["upoly", "build", "--age", "graphs-with-loops", "--arity", "2", "--task-size", "1", "--steps", "50", "--audit-universality", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = forge(&["upoly", "build", "--age", "chains", "--arity", "2", "--steps", "5"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("counterexample chains"), "{}", stderr(&o));
    let o = forge(&["upoly", "build", "--age", "graphs-with-loops", "--steps", "0", "--audit-universality", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = forge(&["upoly", "audit", "--age", "graphs-with-loops", "--steps", "0", "--universality", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn upoly_factorizes_its_own_table() {
    let dir = tempfile::tempdir().unwrap();
    let stage = ["--age", "posets", "--steps", "6", "--universality-size", "2", "--saturation-size", "1"];
    let o = forge(&[&["upoly", "build"][..], &stage].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let table = write(dir.path(), "f.json", &v["u"]);
    let o = forge(&[&["upoly", "factorize", "--table", &table, "--anchor", "v0"][..], &stage].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let f: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(f["iota"]["v0"], "v0");
}

#[test]
fn counterexamples_reproduce() {
    let o = forge(&["counterexample", "chains", "--arity", "2"]);
    assert_eq!(code(&o), 3);
    let o = forge(&["counterexample", "urysohn", "--arity", "2", "--format", "text"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("1 + 10 = 11"));
}
