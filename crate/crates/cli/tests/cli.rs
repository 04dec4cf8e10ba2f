use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const INDEPENDENCE_TREE: &str = r#"{"stages":[{"id":0,"symbols":["s0","s1"]},{"id":1,"symbols":["s2","s3"]}],
"nodes":[{"id":0,"stage":0,"degree":1},{"id":1,"stage":1,"degree":1,"parent":0,"via":[1,0]},
{"id":2,"stage":1,"degree":1,"parent":0,"via":[0,1]}]}"#;

const INDEPENDENCE_PAIR: &str = r#"{"H":[[1,1,0,0],[0,0,1,1],[1,0,1,0],[0,1,0,1],[-2,-2,-2,-2]],
"labels":["s0","s1","s2","s3","-(s0+s1+s2+s3)"],"lambda":["4","4","4","4"]}"#;

fn hornlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hornlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn family2d_horn_is_six_by_nine_with_lambda() {
    let o = hornlab(&["family2d", "--a", "1", "--b", "2", "--d", "1", "horn"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 7);
    for l in &lines[..6] {
        assert_eq!(l.split('\t').count(), 10, "{l}");
    }
    assert!(lines[0].starts_with("h1\t"));
    assert!(lines[4].starts_with("-(h1+h3)\t"));
    assert_eq!(lines[6], "lambda\t-1\t-1\t2\t4\t2\t-1\t-3\t-3\t-1");
}

#[test]
fn independence_pair_validates() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "independence.json", INDEPENDENCE_PAIR);
    let o = hornlab(&["horn", "validate", "--in", s(&f), "--samples", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn broken_pair_fails_with_counterexample() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "bad.json", r#"{"H":[[1,1,0],[0,1,1],[-1,-2,-1]],"lambda":["1","1","1"]}"#);
    let o = hornlab(&["horn", "validate", "--in", s(&f)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("counterexample"));
}

#[test]
fn tree_horn_minimizes_to_independence_pair() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "tree.json", INDEPENDENCE_TREE);
    let o = hornlab(&["tree", "horn", "--in", s(&t), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let h = write(&dir, "pair.json", &stdout(&o));
    let o = hornlab(&["horn", "minimize", "--in", s(&h)]);
    let out = stdout(&o);
    assert!(out.contains("\t-2\t-2\t-2\t-2\n"));
    assert!(out.ends_with("lambda\t4\t4\t4\t4\n"));
}

#[test]
fn tree_mle_is_rational() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "tree.json", INDEPENDENCE_TREE);
    let c = write(&dir, "counts.json", "[1, 2, 3, 4]");
    let o = hornlab(&["tree", "mle", "--in", s(&t), "--counts", s(&c)]);
    assert_eq!(o.status.code(), Some(0));
    let h = hornlab(&["tree", "horn", "--in", s(&t), "--format", "json"]);
    let hp = write(&dir, "pair.json", &stdout(&h));
    let u = write(&dir, "u.json", "[1, 2, 3, 4]");
    let e = hornlab(&["horn", "eval", "--in", s(&hp), "--u", s(&u)]);
    let mle_p = stdout(&o).lines().find(|l| l.starts_with("p\t")).unwrap().to_string();
    assert_eq!(stdout(&e).trim_end(), mle_p);
}

#[test]
fn tree_checks_pass_on_independence() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "tree.json", INDEPENDENCE_TREE);
    for action in ["balanced", "invariants", "star", "simple", "collections", "appendixB"] {
        let o = hornlab(&["tree", action, "--in", s(&t), "--samples", "10"]);
        assert_eq!(o.status.code(), Some(0), "{action}: {}", stdout(&o));
    }
}

#[test]
fn polytope_m_has_labelled_rows() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "square.json", r#"{"points":[[0,0],[1,0],[0,1],[1,1]]}"#);
    let o = hornlab(&["polytope", "M", "--in", s(&f)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("-(")).count(), 2);
    assert!(out.ends_with("is_horn\ttrue\n"));
    let o = hornlab(&["polytope", "primitive", "--in", s(&f)]);
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = hornlab(&["polytope", "ldm", "--in", s(&f)]);
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn strict_and_m_checks() {
    let o = hornlab(&["family2d", "--a", "0", "--b", "2", "--d", "1", "check-strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = hornlab(&["family2d", "--a", "1", "--b", "2", "--d", "1", "check-strict"]);
    assert_eq!(o.status.code(), Some(1));
    let o = hornlab(&["family2d", "--a", "1", "--b", "2", "--d", "1", "check-M"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn prismatoid_catalog_line() {
    let o = hornlab(&["prismatoid", "--a", "1", "--a2", "0", "--b", "1", "--b2", "0", "--d", "1", "--l", "1", "catalog"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "Trapezoidal pyramids with b=1\tpass\t7x6\t1 0 1 0 1 1\n");
}

#[test]
fn prismatoid_tree_round_trips_through_tree_horn() {
    let dir = TempDir::new().unwrap();
    let o = hornlab(&["prismatoid", "--a", "1", "--a2", "0", "--b", "1", "--b2", "0", "--d", "1", "tree"]);
    let t = write(&dir, "t.json", &stdout(&o));
    let o = hornlab(&["tree", "horn", "--in", s(&t)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().last().unwrap().split('\t').count(), 7);
}

#[test]
fn appendix_a_report_writes_one_line_per_tuple() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("a.tsv");
    let o = hornlab(&["report", "appendixA", "--max-param", "1", "--out", s(&out)]);
    let summary = stdout(&o);
    assert_eq!(summary.lines().count(), 24);
    for l in summary.lines() {
        let status = l.split('\t').nth(1).unwrap();
        assert!(["pass", "fail", "untested"].contains(&status), "{l}");
    }
    let body = std::fs::read_to_string(&out).unwrap();
    assert!(body.lines().count() >= 5);
    assert!(body.lines().all(|l| l.split('\t').count() == 4));
    let expected = if summary.contains("\tfail\t") { 1 } else { 0 };
    assert_eq!(o.status.code(), Some(expected));
}

#[test]
fn output_is_deterministic() {
    let args = ["family2d", "--a", "2", "--b", "1", "--d", "1", "check-M", "--seed", "7", "--format", "json"];
    assert_eq!(hornlab(&args).stdout, hornlab(&args).stdout);
}

#[test]
fn json_output_reparses() {
    let dir = TempDir::new().unwrap();
    let o = hornlab(&["family2d", "--a", "1", "--b", "1", "--d", "1", "horn", "--format", "json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let f = write(&dir, "p.json", &v.to_string());
    let o2 = hornlab(&["horn", "minimize", "--in", s(&f), "--format", "json"]);
    let w: Value = serde_json::from_slice(&o2.stdout).unwrap();
    assert_eq!(w["H"].as_array().unwrap().len(), 6);
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(hornlab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(hornlab(&["tree", "horn", "--in", "/nonexistent.json"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "t.json", INDEPENDENCE_TREE);
    assert_eq!(hornlab(&["tree", "mle", "--in", s(&t)]).status.code(), Some(2));
    let c = write(&dir, "c.json", "[1, 2]");
    assert_eq!(hornlab(&["tree", "mle", "--in", s(&t), "--counts", s(&c)]).status.code(), Some(2));
}
