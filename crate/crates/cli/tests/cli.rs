use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn rdes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdes")).args(args).output().expect("runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn temp(suffix: &str, text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn both_sides_of_the_worked_example_print_identically() {
    let l = rdes(&["calc", path(&corpus("ex2_lhs.rp"))]);
    let r = rdes(&["calc", path(&corpus("ex2_rhs.rp"))]);
    assert_eq!(l.status.code(), Some(0));
    assert_eq!(stdout(&l), stdout(&r));
    assert!(stdout(&l).starts_with("⦗true_r | E(true | <> | {a.1}) | Phi(true | {x ↦ 3} | <a.1>)⦘"));
}

#[test]
fn skip_contract() {
    let o = rdes(&["calc", path(&corpus("skip.rp"))]);
    assert!(stdout(&o).starts_with("⦗true_r | false | Phi(true | id | <>)⦘"), "{}", stdout(&o));
}

#[test]
fn calc_json_has_components() {
    let o = rdes(&["calc", "--format", "json", path(&corpus("choice.rp"))]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["peri"].as_array().unwrap().len(), 2);
    assert_eq!(v["flags"]["productive"], "yes");
}

#[test]
fn deadlock_freedom_exit_codes() {
    let dlf = corpus("dlf.rc");
    assert_eq!(rdes(&["refine", path(&dlf), path(&corpus("buffer.rp"))]).status.code(), Some(0));
    assert_eq!(rdes(&["dlf", path(&corpus("buffer.rp"))]).status.code(), Some(0));
    let stop = rdes(&["refine", path(&dlf), path(&corpus("stop.rp"))]);
    assert_eq!(stop.status.code(), Some(1));
    assert!(stdout(&stop).starts_with("Refuted"));
    let o = rdes(&["dlf", "--format", "json", path(&corpus("a_stop.rp"))]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"]["verdict"], "refuted");
    assert_eq!(v["verdict"]["witness"]["trace"][0]["chan"], "a");
}

#[test]
fn buffer_order_by_invariant() {
    let buffer = corpus("buffer.rp");
    let inv = "outps(tt) <= bf ^ inps(tt)";
    let spec = corpus("order.rc");
    let o = rdes(&["inv-check", path(&buffer), "--invariant", inv, "--spec", path(&spec)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("[Verified] assign-prefix peri"));
    let o = rdes(&["refine", path(&spec), path(&buffer), "--invariant", inv]);
    assert_eq!(o.status.code(), Some(0));
    let o = rdes(&["inv-check", path(&buffer), "--invariant", "inps(tt) <= outps(tt)"]);
    assert_eq!(o.status.code(), Some(1));
    let f = temp(".inv", "pre: true\nperi: outps(tt) <= bf ^ inps(tt)\npost: true\n");
    let o = rdes(&["inv-check", path(&buffer), "--invariant-file", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn oracle_emits_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("observations.json");
    let o = rdes(&["oracle", path(&corpus("choice.rp")), "--emit", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("quiet <> accepting {a, c}"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["quiets"].as_array().unwrap().len(), 2);
    assert_eq!(v["terms"].as_array().unwrap().len(), 2);
}

#[test]
fn crosscheck_is_deterministic_across_job_counts() {
    let args = ["crosscheck", "--random", "30", "--loops", "10", "--seed", "7", "--format", "json"];
    let a = rdes(&[&args[..], &["--jobs", "1"]].concat());
    let b = rdes(&[&args[..], &["--jobs", "4"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["programs"], 40);
    assert_eq!(v["failing"], 0);
    let o = rdes(&["crosscheck", path(&corpus("buffer.rp")), "--trace-bound", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 diffs"));
}

#[test]
fn law_suites_run() {
    let o = rdes(&["laws", "--instances", "20", "--ka-instances", "10", "--trace-bound", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| !l.starts_with("FAIL")));
    assert!(stdout(&o).contains("PASS star-denest"));
}

#[test]
fn errors_exit_with_two() {
    let bad = temp(".rp", "channel a\na -> -> skip\n");
    let o = rdes(&["calc", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error at 2:"));
    let loop_ = temp(".rp", "var x : int[0..3]\nwhile x < 3 do x := x + 1\n");
    let o = rdes(&["calc", loop_.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not productive"));
    assert_eq!(rdes(&["calc", "--trace-bound", "0", path(&corpus("skip.rp"))]).status.code(), Some(2));
    assert_eq!(rdes(&["calc", "/nonexistent.rp"]).status.code(), Some(2));
}
