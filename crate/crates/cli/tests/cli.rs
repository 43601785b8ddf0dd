use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use manifold_core::covers::HierarchicalCover;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_manifold"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn setup() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().to_path_buf();
    std::fs::write(p.join("dist.csv"), "a,b,c,d\n0,1,2,3\n1,0,1,2\n2,1,0,1\n3,2,1,0\n").unwrap();
    std::fs::write(p.join("pts.csv"), "0,0\n1,0\n0,1\n1,1\n4,4\n").unwrap();
    std::fs::write(p.join("two.csv"), "0,1\n1,0\n").unwrap();
    (dir, p)
}

#[test]
fn embed_writes_embedding_and_manifest() {
    let (_d, p) = setup();
    let o = run(&p, &["embed", "--algo", "sls", "--m", "2", "--in", "dist.csv", "--out", "emb.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(p.join("emb.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("a,"));
    assert_eq!(rows[0].split(',').count(), 3);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("emb.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "embed");
    assert_eq!(m["inputs"][0]["path"], "dist.csv");
    assert_eq!(m["outputs"][0]["path"], "emb.csv");
}

#[test]
fn embed_with_pipeline_grammar_matches_algo() {
    let (_d, p) = setup();
    let a = run(&p, &["embed", "--algo", "kvertex", "--k", "2", "--in", "dist.csv", "--out", "a.csv"]);
    let b = run(&p, &["embed", "--pipeline", "cluster=vlk:2,loss=mds", "--in", "dist.csv", "--out", "b.csv"]);
    assert_eq!((code(&a), code(&b)), (0, 0));
    assert_eq!(std::fs::read(p.join("a.csv")).unwrap(), std::fs::read(p.join("b.csv")).unwrap());
    let bad = run(&p, &["embed", "--pipeline", "cluster=bogus", "--in", "dist.csv", "--out", "c.csv"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn every_algorithm_runs_on_points() {
    let (_d, p) = setup();
    for algo in ["mmds", "sls", "isomap", "kpath", "kvertex", "umap", "mdsfuzzy"] {
        let o = run(&p, &["embed", "--algo", algo, "--format", "points", "--in", "pts.csv", "--out", "e.csv", "--trace", "t.csv", "--report", "r.json"]);
        assert_eq!(code(&o), 0, "{algo}: {}", String::from_utf8_lossy(&o.stderr));
        let trace = std::fs::read_to_string(p.join("t.csv")).unwrap();
        assert!(trace.starts_with("iteration,loss,step,grad_norm\n"));
    }
}

#[test]
fn cluster_cover_round_trips_and_interleaves_to_zero() {
    let (_d, p) = setup();
    let o = run(&p, &["cluster", "--functor", "sl", "--in", "dist.csv", "--out", "h.json"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(p.join("h.json")).unwrap();
    let h: HierarchicalCover = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::from_str::<HierarchicalCover>(&serde_json::to_string(&h).unwrap()).unwrap(), h);
    assert_eq!(h.scales(), &[0.0, 1.0]);
    let o = run(&p, &["interleave", "--a", "h.json", "--b", "h.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "0");
}

#[test]
fn interleave_two_point_spaces() {
    let (_d, p) = setup();
    std::fs::write(p.join("two2.csv"), "0,2\n2,0\n").unwrap();
    run(&p, &["cluster", "--functor", "sl", "--in", "two.csv", "--out", "h1.json"]);
    run(&p, &["cluster", "--functor", "sl", "--in", "two2.csv", "--out", "h2.json"]);
    let o = run(&p, &["interleave", "--a", "h1.json", "--b", "h2.json", "--out", "i.json"]);
    assert_eq!(stdout(&o).trim(), "1");
}

#[test]
fn stability_report() {
    let (_d, p) = setup();
    std::fs::write(p.join("pts2.csv"), "0,0.05\n1,0\n0,1\n1.02,1\n4,4\n").unwrap();
    let o = run(&p, &["stability", "--algo", "mmds", "--format", "points", "--x", "pts.csv", "--y", "pts2.csv", "--out", "s.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("s.json")).unwrap()).unwrap();
    assert_eq!(s["prop8"]["pass"], true);
    assert_eq!(s["prop9"]["pass"], true);
    let o = run(&p, &["stability", "--algo", "umap", "--format", "points", "--x", "pts.csv", "--y", "pts2.csv", "--out", "u.json"]);
    assert_eq!(code(&o), 0);
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("u.json")).unwrap()).unwrap();
    assert!(s["prop9"].is_null());
}

#[test]
fn flatten_check_reports() {
    let (_d, p) = setup();
    let o = run(&p, &["flatten-check", "--in", "two.csv", "--i", "0", "--j", "1", "--out", "f.json"]);
    assert_eq!(code(&o), 0);
    let f: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("f.json")).unwrap()).unwrap();
    let pair = &f["pairs"][0];
    assert_eq!(pair["target"], 1.0);
    assert_eq!(pair["quadrature"]["converged"], true);
    assert!(pair["grid_argmin"].is_number());

    std::fs::write(p.join("one.csv"), "0\n").unwrap();
    let o = run(&p, &["flatten-check", "--in", "one.csv", "--out", "g.json"]);
    assert_eq!(code(&o), 0);
    let g: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("g.json")).unwrap()).unwrap();
    assert_eq!(g["pairs"].as_array().unwrap().len(), 0);
}

#[test]
fn flatten_check_zero_membership_needs_truncation() {
    let (_d, p) = setup();
    std::fs::write(p.join("far.csv"), "0\n1\n2\n1000\n").unwrap();
    let args = ["flatten-check", "--functor", "ml", "--format", "points", "--in", "far.csv", "--i", "0", "--j", "3"];
    let o = run(&p, &args);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncation"));
    let mut with = args.to_vec();
    with.extend(["--truncation", "1e-6", "--out", "t.json"]);
    let o = run(&p, &with);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("t.json")).unwrap()).unwrap();
    assert_eq!(t["pairs"][0]["truncated"], true);
}

#[test]
fn bench_dna_small() {
    let (_d, p) = setup();
    let o = run(&p, &["bench-dna", "--n", "4", "--m-steps", "3", "--len", "40", "--reps", "2", "--out", "t.csv", "--json", "t.json", "--embeddings", "e.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(p.join("t.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    let emb = std::fs::read_to_string(p.join("e.csv")).unwrap();
    assert_eq!(emb.lines().count(), 1 + 4 * 12);
}

#[test]
fn exit_codes() {
    let (_d, p) = setup();
    let missing = run(&p, &["embed", "--algo", "sls", "--in", "nope.csv", "--out", "x.csv"]);
    assert_eq!(code(&missing), 1);
    let unknown = run(&p, &["embed", "--bogus"]);
    assert_eq!(code(&unknown), 1);
    std::fs::write(p.join("asym.csv"), "0,1\n2,0\n").unwrap();
    let asym = run(&p, &["embed", "--algo", "sls", "--in", "asym.csv", "--out", "x.csv"]);
    assert_eq!(code(&asym), 1);
    std::fs::write(p.join("big.csv"), "0,0\n1e160,0\n").unwrap();
    let overflow = run(&p, &["embed", "--algo", "mmds", "--format", "points", "--in", "big.csv", "--out", "x.csv"]);
    assert_eq!(code(&overflow), 2);
    assert_eq!(code(&run(&p, &["--help"])), 0);
}

#[test]
fn json_errors() {
    let (_d, p) = setup();
    let o = run(&p, &["--json-errors", "embed", "--algo", "sls", "--in", "nope.csv", "--out", "x.csv"]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"]["exit_code"], 1);
    assert_eq!(v["error"]["kind"], "io");
    let o = run(&p, &["--json-errors", "embed", "--nope"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn version_has_build_hash() {
    let o = bin().arg("--version").output().unwrap();
    let v = stdout(&o);
    assert!(v.contains(env!("CARGO_PKG_VERSION")) && v.contains('('), "{v}");
}

#[test]
fn config_precedence() {
    let (_d, p) = setup();
    std::fs::write(p.join("run.conf"), "# defaults for this run\nm = 3\nmax_iters = 7\n").unwrap();
    let o = run(&p, &["--config", "run.conf", "embed", "--algo", "sls", "--in", "dist.csv", "--out", "e.csv", "--m", "1", "--report", "r.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["m"], 1);
    assert!(r["iterations"].as_u64().unwrap() <= 7);
    let o = run(&p, &["--config", "run.conf", "embed", "--algo", "sls", "--in", "dist.csv", "--out", "e.csv", "--report", "r.json"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["m"], 3);
    let o = run(&p, &["embed", "--algo", "sls", "--in", "dist.csv", "--out", "e.csv", "--report", "r.json"]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!((code(&o), r["m"].as_u64()), (0, Some(2)));
}

#[test]
fn rerun_detects_changed_inputs() {
    let (_d, p) = setup();
    assert_eq!(code(&run(&p, &["embed", "--algo", "mmds", "--in", "dist.csv", "--out", "e.csv"])), 0);
    let o = run(&p, &["rerun", "--manifest", "e.csv.manifest.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(p.join("dist.csv"), "0,1\n1,0\n").unwrap();
    let o = run(&p, &["rerun", "--manifest", "e.csv.manifest.json"]);
    assert_eq!(code(&o), 1);
}
