use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kikuchi(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kikuchi"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = kikuchi(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_writes_the_requested_sizes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen", "--n", "12", "--q", "3", "--k", "4", "--delta", "0.25", "--seed", "1", "--out", "a.json"], dir.path());
    let inst = json(&dir.path().join("a.json"));
    let hs = inst["hypergraphs"].as_array().unwrap();
    assert_eq!(hs.len(), 4);
    for h in hs {
        let h = h.as_array().unwrap();
        assert_eq!(h.len(), 3);
        assert!(h.iter().all(|e| e.as_array().unwrap().len() == 3));
    }
    assert_eq!(inst["config"]["args"]["seed"], 1);
    assert!(inst["tool_version"].is_string());
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "--n", "15", "--q", "5", "--k", "3", "--delta", "0.2", "--seed", "9", "--out", "a.json"];
    ok(&args, dir.path());
    let a = fs::read(dir.path().join("a.json")).unwrap();
    ok(&args, dir.path());
    let b = fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn planted_gen_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["gen", "--n", "14", "--q", "3", "--k", "4", "--delta", "0.2", "--seed", "2", "--planted", "--out", "p.json"],
        dir.path(),
    );
    let code = json(&dir.path().join("p.json.code.json"));
    assert_eq!(code["code"]["generator"].as_array().unwrap().len(), 4);
}

#[test]
fn pipeline_refute_soundness_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--n", "12", "--q", "3", "--k", "4", "--delta", "0.25", "--seed", "3", "--out", "a.json"], d);
    ok(&["decompose", "--in", "a.json", "--out", "dec.json"], d);
    assert!(json(&d.join("dec.json"))["provenance"].is_array());
    ok(&["refute", "--in", "a.json", "--ell", "1", "--exhaustive-signs", "--out", "c.json"], d);
    let cert = json(&d.join("c.json"));
    assert_eq!(cert["signs"].as_array().unwrap().len(), 16);
    assert!(cert["metadata"]["timestamp"].is_string());
    ok(&["soundness", "--cert", "c.json", "--exhaustive-b"], d);
    let stdout = ok(&["verify", "--instance", "a.json", "--cert", "c.json"], d);
    assert!(stdout.contains("reproduction: ok"));
}

#[test]
fn refute_reproduces_except_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--n", "12", "--q", "3", "--k", "5", "--delta", "0.25", "--seed", "4", "--out", "a.json"], d);
    ok(&["refute", "--in", "a.json", "--ell", "1", "--out", "c1.json"], d);
    ok(&["refute", "--in", "a.json", "--ell", "1", "--out", "c2.json", "--threads", "1"], d);
    let mut a = json(&d.join("c1.json"));
    let mut b = json(&d.join("c2.json"));
    a.as_object_mut().unwrap().remove("metadata");
    b.as_object_mut().unwrap().remove("metadata");
    assert_eq!(a, b);
}

#[test]
fn tampered_certificate_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--n", "12", "--q", "3", "--k", "4", "--delta", "0.25", "--seed", "3", "--out", "a.json"], d);
    ok(&["refute", "--in", "a.json", "--ell", "1", "--exhaustive-signs", "--out", "c.json"], d);
    let mut cert = json(&d.join("c.json"));
    for p in cert["regular"]["partitions"].as_array_mut().unwrap() {
        let len = p["part"]["norms"].as_array().unwrap().len();
        p["part"]["norms"] = Value::from(vec![0.0; len]);
    }
    fs::write(d.join("t.json"), serde_json::to_string(&cert).unwrap()).unwrap();
    let out = kikuchi(&["verify", "--instance", "a.json", "--cert", "t.json"], d);
    assert_eq!(out.status.code(), Some(1));
    let out = kikuchi(&["soundness", "--cert", "t.json"], d);
    assert_eq!(out.status.code(), Some(1));

    let mut cert = json(&d.join("c.json"));
    let bounds = cert["per_b_bound"].as_array().unwrap().len();
    cert["per_b_bound"] = Value::from(vec![0.5; bounds]);
    fs::write(d.join("t2.json"), serde_json::to_string(&cert).unwrap()).unwrap();
    let out = kikuchi(&["verify", "--instance", "a.json", "--cert", "t2.json"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes_for_config_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = kikuchi(&["verify", "--instance", "missing.json", "--cert", "c.json"], d);
    assert_eq!(out.status.code(), Some(3));
    let out = kikuchi(&["gen", "--n", "2", "--q", "3", "--k", "1", "--delta", "0.2", "--out", "x.json"], d);
    assert_eq!(out.status.code(), Some(2));
    let out = kikuchi(&["gen", "--n", "12"], d);
    assert_eq!(out.status.code(), Some(2));
    ok(&["gen", "--n", "12", "--q", "3", "--k", "4", "--delta", "0.25", "--out", "a.json"], d);
    let out = kikuchi(&["refute", "--in", "a.json", "--epsilon", "2", "--out", "c.json"], d);
    assert_eq!(out.status.code(), Some(2));
    let out = kikuchi(&["oracle", "--in", "a.json", "--b", "1,-1"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_all_b_matches_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--n", "10", "--q", "3", "--k", "3", "--delta", "0.3", "--out", "a.json"], d);
    let out: Value = serde_json::from_str(&ok(&["oracle", "--in", "a.json", "--all-b"], d)).unwrap();
    let values = out["values"].as_array().unwrap();
    assert_eq!(values.len(), 8);
    let total = out["total_edges"].as_i64().unwrap();
    assert!(values.iter().all(|v| v["val"].as_i64().unwrap() <= total));
}

#[test]
fn build_dump_has_closed_form_edge_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--n", "10", "--q", "3", "--k", "3", "--delta", "0.3", "--out", "a.json"], d);
    ok(&["build", "--in", "a.json", "--variant", "naive-odd", "--ell", "2", "--out", "g.json"], d);
    let g = json(&d.join("g.json"));
    let per_label: usize = g["per_label"].as_str().unwrap().parse().unwrap();
    // C(3,1) C(7,1) = 21 for q = 3, n = 10, ell = 2
    assert_eq!(per_label, 21);
    assert_eq!(g["edges"].as_array().unwrap().len(), 21 * g["num_labels"].as_u64().unwrap() as usize);
}

#[test]
fn sweep_rows_and_planted_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "sweep", "--n", "14", "--q", "3", "--delta", "0.2", "--k", "2,3,4", "--seeds", "1,2", "--planted", "--ell",
            "1", "--out", "s.csv",
        ],
        d,
    );
    let mut reader = csv::Reader::from_path(d.join("s.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let idx = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(&r[idx("verdict")], "not refuted");
        let bound: f64 = r[idx("combined_bound")].parse().unwrap();
        let dnk: f64 = r[idx("eps_delta_n_k")].parse::<f64>().unwrap() / 0.1;
        let ratio: f64 = r[idx("ratio")].parse().unwrap();
        assert!((ratio - bound / dnk).abs() <= 1e-9 * ratio.abs().max(1.0));
    }
}
