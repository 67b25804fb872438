use std::path::Path;
use std::process::{Command, Output};

fn dco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dco")).args(args).output().unwrap()
}

fn stdout_ok(args: &[&str]) -> String {
    let out = dco(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.split_whitespace()
        .find_map(|t| t.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn line_dataset_has_unit_intrinsic_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("line.fvecs");
    stdout_ok(&["ingest", "--synthetic", "line", "--n", "5000", "--dim", "16", "--output", s(&base)]);
    let out = stdout_ok(&["stats", "--input", s(&base)]);
    assert_eq!(field(&out, "count="), 5000.0);
    let lid = field(&out, "lid=");
    assert!((lid - 1.0).abs() < 0.2, "lid {lid}");
}

#[test]
fn full_beam_query_recovers_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n);
    stdout_ok(&[
        "ingest", "--synthetic", "gaussian", "--n", "800", "--dim", "12", "--queries", "20", "--queries-out",
        s(&path("q.fvecs")), "--output", s(&path("b.fvecs")),
    ]);
    stdout_ok(&["gt", "--base", s(&path("b.fvecs")), "--queries", s(&path("q.fvecs")), "--k", "10", "--output", s(&path("gt.ivecs"))]);
    stdout_ok(&["fit-dco", "--kind", "pca", "--base", s(&path("b.fvecs")), "--output", s(&path("pca.dco"))]);
    stdout_ok(&[
        "build", "--base", s(&path("b.fvecs")), "--transform", s(&path("pca.dco")), "--ef-construction", "50",
        "--output", s(&path("pca.hnsw")),
    ]);
    let out = stdout_ok(&[
        "query", "--base", s(&path("b.fvecs")), "--index", s(&path("pca.hnsw")), "--model", s(&path("pca.dco")),
        "--queries", s(&path("q.fvecs")), "--all", "--k", "10", "--ef", "800", "--gt", s(&path("gt.ivecs")),
    ]);
    assert_eq!(field(&out, "recall="), 1.0, "{out}");
}

#[test]
fn errors_are_single_categorised_lines() {
    let out = dco(&["stats", "--input", "/nonexistent/x.fvecs"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error["), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");

    let out = dco(&["build", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.cfg");
    std::fs::write(&cfg, "data.base = x\nbench.colour = red\n").unwrap();
    let out = dco(&["bench", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bench.colour"));
}
