use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gcx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcx")).args(args).env("GCX_DATA_DIR", dir).output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn ged_prints_distance_and_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("path.json"), r#"{"num_nodes":3,"edges":[[0,1],[1,2]]}"#).unwrap();
    std::fs::write(dir.path().join("tri.json"), r#"{"num_nodes":3,"edges":[[0,1],[1,2],[0,2]]}"#).unwrap();
    std::fs::write(dir.path().join("bad.json"), "{").unwrap();

    let ok = gcx(dir.path(), &["--json", "ged", "path.json", "tri.json"]);
    assert!(ok.status.success());
    assert_eq!(json_of(&ok)["distance"], 1.0);

    let bad = gcx(dir.path(), &["--json", "ged", "path.json", "bad.json"]);
    assert_eq!(bad.status.code(), Some(4));
    assert_eq!(json_of(&bad)["error"], "json");

    let missing = gcx(dir.path(), &["ged", "path.json", "absent.json"]);
    assert_eq!(missing.status.code(), Some(9));
}

#[test]
fn gen_resolves_against_data_dir_and_rejects_unknown_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcx(dir.path(), &["--json", "--seed", "3", "gen", "tree_cycles", "--out", "tc"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["dataset.json", "manifest.json", "graph.json", "labels.json"] {
        assert!(dir.path().join("tc").join(file).exists(), "{file}");
    }
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("tc/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);

    let unknown = gcx(dir.path(), &["gen", "ba_hexagons", "--out", "x"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).starts_with("gcx: "));
}

#[test]
fn score_on_a_run_without_concepts_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let train = gcx(dir.path(), &["train", "--dataset", "ba_shapes", "--epochs", "5", "--out", "run"]);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let score = gcx(dir.path(), &["--json", "score", "run"]);
    assert_eq!(score.status.code(), Some(10));

    let discover = gcx(dir.path(), &["--json", "discover", "run", "--k", "0"]);
    assert_eq!(discover.status.code(), Some(2));
    assert_eq!(json_of(&discover)["fields"][0], "k");

    std::fs::write(dir.path().join("run/trace.bin"), b"GCXT").unwrap();
    let tampered = gcx(dir.path(), &["score", "run"]);
    assert_eq!(tampered.status.code(), Some(8));
}
