use std::path::{Path, PathBuf};
use std::process::Command;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/corpus")
}

fn run(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_asv-fallback")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn batch_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = corpus();

    let cache = d.join("monitor.bin");
    let line = run(&["calibrate-monitor", "--corpus", corpus.to_str().unwrap(), "--alpha", "0.5", "--out", cache.to_str().unwrap()]);
    let summary: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(summary["n"], 2);
    let scores = run(&["score-monitor", "--cache", cache.to_str().unwrap(), "--corpus", corpus.to_str().unwrap()]);
    assert_eq!(scores.lines().count(), 4);

    let cand = d.join("cand");
    run(&["gen-candidates", "--scene", corpus.join("s03-quay-right.scene.json").to_str().unwrap(), "--out", cand.to_str().unwrap()]);
    assert!(cand.join("s03-quay-right.png").exists());

    let cfg = d.join("suite.toml");
    std::fs::write(&cfg, format!("corpus = {:?}\noutput = \"out\"\n[[models]]\nname = \"mock\"\nkind = \"mock\"\n", corpus)).unwrap();
    let md_path = run(&["eval-offline", "--config", cfg.to_str().unwrap()]);
    assert_eq!(PathBuf::from(md_path.trim()), d.join("out/report.md"));
    let md = run(&["report", "--input", d.join("out/report.json").to_str().unwrap()]);
    assert_eq!(md, std::fs::read_to_string(d.join("out/report.md")).unwrap());

    let out = Command::new(env!("CARGO_BIN_EXE_asv-fallback")).args(["eval-offline", "--config", "/nonexistent.toml"]).output().unwrap();
    assert!(!out.status.success());
}
