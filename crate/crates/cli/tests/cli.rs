use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qdhj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdhj"))
        .args(args)
        .env_remove("QDHJ_THREADS")
        .output()
        .expect("binary runs")
}

fn qdhj_stdin(args: &[&str], input: &str) -> Output {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_qdhj"))
        .args(args)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn result(out: &Output) -> Value {
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout))
    });
    doc["result"].clone()
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let p = std::env::temp_dir().join(format!("qdhj-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        TempDir(p)
    }

    fn file(&self, name: &str, contents: &[u8]) -> PathBuf {
        let p = self.0.join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn subspace_reports_rank_and_parity() {
    let out = qdhj(&["subspace", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = result(&out);
    assert_eq!(r["rank"], 14);
    assert_eq!(r["parity_ok"], true);
    assert_eq!(r["squares"]["in_subspace"], 1);
    assert_eq!(r["basis"].as_array().unwrap().len(), 14);
}

#[test]
fn identities_example_is_all_zero() {
    let out = qdhj(&["identities", "--gamma-size", "3..6", "--n", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let r = result(&out);
    assert_eq!(r["all_zero"], true);
    assert_eq!(r["all_ok"], true);
    let small = qdhj(&["identities", "--gamma-size", "1..2", "--n", "5"]);
    assert_eq!(small.status.code(), Some(0));
    assert_eq!(result(&small)["all_zero"], false);
}

#[test]
fn classify_reads_stdin_and_reports_locations() {
    let out = qdhj_stdin(&["classify"], "011\n000\n011\n");
    assert_eq!(out.status.code(), Some(0));
    let r = result(&out);
    assert_eq!(r["shape"], "Rect");
    assert_eq!(r["gamma1"], serde_json::json!([1, 3]));
    assert_eq!(r["gamma2"], serde_json::json!([2, 3]));

    let bad = qdhj_stdin(&["classify"], "011\n0x0\n011\n");
    assert_eq!(bad.status.code(), Some(2));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("line 2") && err.contains("column 2"), "{err}");
}

#[test]
fn rect_pair_certificates_verify_and_tampering_is_caught() {
    let dir = TempDir::new("rect");
    let out = qdhj(&["rect-pair", "--n", "4", "--delta", "1/4", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = result(&out);
    assert_eq!(r["found"], 15);
    let path = dir.file("rp.json", &out.stdout);
    let ok = qdhj(&["verify", "--in", s(&path)]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(result(&ok)["verified"], 15);

    let mut cert = r["results"][0]["certificate"].clone();
    let bare = dir.file("one.json", serde_json::to_string(&cert).unwrap().as_bytes());
    assert_eq!(qdhj(&["verify", "--in", s(&bare)]).status.code(), Some(0));

    cert["b"] = Value::String(cert["a"].as_str().unwrap().to_string());
    let tampered = dir.file("bad.json", serde_json::to_string(&cert).unwrap().as_bytes());
    assert_eq!(qdhj(&["verify", "--in", s(&tampered)]).status.code(), Some(1));

    let broken = dir.file("broken.json", b"{\"kind\": \"rect_pair\", \"a\": ");
    assert_eq!(qdhj(&["verify", "--in", s(&broken)]).status.code(), Some(2));
}

#[test]
fn sparse_sets_report_not_found() {
    let out = qdhj(&["rect-pair", "--n", "3", "--set", "random", "--size", "2", "--gamma", "1,2,3"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(result(&out)["missing"], 1);
    let lines = qdhj(&["lines", "--n", "3", "--set", "spiral"]);
    assert_eq!(lines.status.code(), Some(1));
    assert_eq!(result(&lines)["complete"], true);
}

#[test]
fn line_to_subspace_pipeline() {
    let dir = TempDir::new("line");
    let out = qdhj(&["lines", "--n", "4", "--set", "spiral"]);
    assert_eq!(out.status.code(), Some(0));
    let r = result(&out);
    assert_eq!(r["count"], 1);
    let cert = &r["certificates"][0];
    assert_eq!(cert["a"], "0000\n0000\n0000\n0000\n");
    assert_eq!(cert["b"], "1111\n1111\n1111\n1111\n");
    let path = dir.file("line.json", serde_json::to_string(cert).unwrap().as_bytes());
    let spec = qdhj(&["mdqhj", "from-line", "--in", s(&path)]);
    assert_eq!(spec.status.code(), Some(0));
    let spec = result(&spec)["spec"].clone();
    let spec_path = dir.file("spec.json", serde_json::to_string(&spec).unwrap().as_bytes());
    let v = qdhj(&["mdqhj", "verify", "--n", "4", "--set", "spiral", "--in", s(&spec_path)]);
    assert_eq!(v.status.code(), Some(0));
    let v = qdhj(&["mdqhj", "verify", "--n", "4", "--set", "odd", "--in", s(&spec_path)]);
    assert_eq!(v.status.code(), Some(1));
}

#[test]
fn mdqhj_actions() {
    let good = qdhj(&["mdqhj", "good", "--k", "3", "--n", "3", "--delta", "0.3", "--m", "2", "--eps", "0.3", "--seed", "2"]);
    assert_eq!(good.status.code(), Some(0));
    let r = result(&good);
    assert_eq!(r["premise"], true);
    assert_eq!(r["holds"], true);
    assert_eq!(r["label_count"], "243");

    let dec = qdhj(&["mdqhj", "decompose", "--k", "2", "--n", "3", "--size", "100", "--p", "0,1,2", "--seed", "4"]);
    assert_eq!(dec.status.code(), Some(0));
    let r = result(&dec);
    let total: u64 = r["rows"].as_array().unwrap().iter().map(|row| row["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 100);
    assert_eq!(r["mass"], 100);

    let comp = qdhj(&["mdqhj", "compose", "--n", "3", "--delta", "0.8", "--m", "1", "--eps", "0.8", "--seed", "1"]);
    assert_eq!(comp.status.code(), Some(0));
    assert_eq!(result(&comp)["verified"], true);

    let no_eps = qdhj(&["mdqhj", "good", "--n", "3", "--size", "10", "--m", "1"]);
    assert_eq!(no_eps.status.code(), Some(2));
}

#[test]
fn repcounts_json_and_csv() {
    let out = qdhj(&["repcounts", "--n", "5", "--m", "4", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let r = result(&out);
    assert_eq!(r["sum"], 105);
    assert_eq!(r["max_r"], 7);
    assert_eq!(r["triple_lhs"], "1260");
    let csv = qdhj(&["repcounts", "--n", "5", "--m", "4", "--seed", "9", "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("gamma,r\n"));
    assert_eq!(text.lines().count(), 17);
    assert!(text.lines().last().unwrap().contains("triple_ok=true"));
}

#[test]
fn extremal_exact_and_greedy() {
    let out = qdhj(&["extremal", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = result(&out);
    assert_eq!(r["best_size"], 8);
    assert_eq!(r["exact"], true);
    let g = qdhj(&["extremal", "--n", "3", "--method", "greedy", "--warm", "spiral", "--seed", "1"]);
    assert_eq!(g.status.code(), Some(0));
    assert!(result(&g)["best_size"].as_u64().unwrap() >= 128);
    let bad_warm = qdhj(&["extremal", "--n", "4", "--method", "greedy", "--warm", "spiral"]);
    assert_eq!(bad_warm.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(qdhj(&["subspace"]).status.code(), Some(2));
    assert_eq!(qdhj(&["lines", "--n", "3", "--mode", "fast"]).status.code(), Some(2));
    assert_eq!(qdhj(&["rect-pair", "--n", "4", "--set", "random"]).status.code(), Some(2));
    assert_eq!(qdhj(&["identities", "--n", "4", "--gamma-size", "5..3"]).status.code(), Some(2));
    assert_eq!(qdhj(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(qdhj(&["subspace", "--n", "4", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn outputs_replay_byte_for_byte() {
    let dir = TempDir::new("replay");
    let runs: [&[&str]; 5] = [
        &["subspace", "--n", "5"],
        &["identities", "--n", "6"],
        &["rect-pair", "--n", "3", "--delta", "1/3", "--seed", "8"],
        &["square-pairs", "--n", "3", "--set", "random", "--size", "200", "--limit", "5", "--seed", "1"],
        &["repcounts", "--n", "4", "--m", "3", "--seed", "2"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let first = qdhj(args);
        let path = dir.file(&format!("{i}.json"), &first.stdout);
        let again = qdhj(&["replay", "--in", s(&path)]);
        assert_eq!(again.status.code(), first.status.code());
        assert_eq!(again.stdout, first.stdout, "{args:?}");
        // A bare config replays too.
        let doc: Value = serde_json::from_slice(&first.stdout).unwrap();
        let cfg = dir.file(&format!("{i}.cfg.json"), doc["config"].to_string().as_bytes());
        assert_eq!(qdhj(&["replay", "--in", s(&cfg)]).stdout, first.stdout);
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new("out");
    let path = dir.0.join("s.json");
    let out = qdhj(&["subspace", "--n", "3", "--out", s(&path)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["result"]["rank"], 7);
}
