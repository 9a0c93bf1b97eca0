use std::path::Path;
use std::process::{Command, Output};

use supergraph::fixtures::scene;
use supergraph::imageio::write_ppm;

fn sg(args: &[&str], extra: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supergraph"))
        .args(args)
        .args(extra)
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn fixture(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("in.ppm");
    write_ppm(&p, &scene(40, 32, 5)).unwrap();
    p
}

const SMALL: [&str; 6] = ["--grid", "8x8", "--iterations", "3", "--hidden", "4"];

#[test]
fn missing_input_is_usage_error() {
    let o = sg(&["segment", "-i", "/no/such/image.ppm", "--out", "/tmp/unused"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("/no/such/image.ppm"));
}

#[test]
fn missing_config_is_usage_error() {
    let o = sg(&["segment", "--config", "/no/such/config.json"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("/no/such/config.json"));
}

#[test]
fn increasing_targets_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let o = sg(&["hierarchy", "--targets", "10,20", "-i"], &[&input]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("decreasing"));
}

#[test]
fn malformed_image_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ppm");
    std::fs::write(&bad, b"P6\n4 4\n255\nshort").unwrap();
    let out = dir.path().join("out");
    let o = sg(&["segment", "-i"], &[&bad, Path::new("--out"), &out]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o.stderr));
}

#[test]
fn segment_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let out = dir.path().join("seg");
    let mut args = vec!["segment"];
    args.extend(SMALL);
    let o = sg(&[&args[..], &["-i"]].concat(), &[&input, Path::new("--out"), &out]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let losses = std::fs::read_to_string(out.join("losses.csv")).unwrap();
    assert!(losses.starts_with("iter,loss_rec,loss_compact,loss_total\n"));
    assert_eq!(losses.lines().count(), 4);
    assert!(out.join("labels.pgm").is_file() && out.join("segment.json").is_file());
    assert!(!out.join("hierarchy.json").exists());
}

#[test]
fn embed_without_coarse_scale_skips_fusion() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let out = dir.path().join("emb");
    let mut args = vec!["embed"];
    args.extend(SMALL);
    args.extend(["--targets", "-i"]);
    let o = sg(&args, &[&input, Path::new("--out"), &out]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("fusion skipped"));
    assert!(out.join("embeddings.csv").is_file());
    assert!(!out.join("fusion.json").exists());
}

#[test]
fn pipeline_needs_two_scales() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let mut args = vec!["pipeline"];
    args.extend(SMALL);
    args.extend(["--targets", "20,10", "-i"]);
    let o = sg(&args, &[&input, Path::new("--out"), &dir.path().join("p")]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o.stderr));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("p");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"input": {:?}, "grid": "8x8", "iterations": 2, "targets": [20], "hidden": 4, "seed": 9, "out": {:?}}}"#,
            input, out
        ),
    )
    .unwrap();
    let o = sg(&["pipeline", "--seed", "3", "--alpha", "0.3", "--config"], &[&cfg]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["seed"], 3);
    assert_eq!(run["alpha"], 0.3);
    assert_eq!(run["iterations"], 2);
    assert!(run.get("out").is_none());
    let v = sg(&["verify", "--filter", "rng", "--outputs"], &[&out]);
    assert_eq!(v.status.code(), Some(0), "{}", text(&v.stdout));
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"grd": "8x8"}"#).unwrap();
    let o = sg(&["segment", "--config"], &[&cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_catches_injected_fault() {
    let o = sg(&["verify", "--filter", "node-wise", "--inject-fault", "alpha-sign"], &[]);
    assert_eq!(o.status.code(), Some(1));
    let out = text(&o.stdout);
    assert!(out.contains("FAIL") && out.contains("1 suites, 1 failed"), "{out}");
    let clean = sg(&["verify", "--filter", "node-wise"], &[]);
    assert_eq!(clean.status.code(), Some(0));
}

#[test]
fn verify_flags_broken_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let out = dir.path().join("p");
    let mut args = vec!["pipeline"];
    args.extend(SMALL);
    args.extend(["--targets", "20", "-i"]);
    assert!(sg(&args, &[&input, Path::new("--out"), &out]).status.success());
    std::fs::write(out.join("hierarchy.json"), "{}").unwrap();
    let v = sg(&["verify", "--filter", "rng", "--outputs"], &[&out]);
    assert_eq!(v.status.code(), Some(1));
}

#[test]
fn bench_reports_grid_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let out = dir.path().join("b");
    let o = sg(
        &["bench", "--iterations", "1", "--targets", "--grids", "8x8,4x4", "-i"],
        &[&input, Path::new("--out"), &out],
    );
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    assert!(csv.starts_with("stage,nodes,edges,millis,bytes\n"));
    assert!(csv.contains("\npixels,1280,"));
    assert!(csv.contains("\ngrid:8x8,64,"));
    assert!(csv.contains("\ngrid:4x4,16,"));
}

#[test]
fn bad_thread_count_is_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_supergraph"))
        .args(["verify", "--filter", "rng"])
        .env("SUPERGRAPH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
