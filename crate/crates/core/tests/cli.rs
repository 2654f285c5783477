use std::path::Path;
use std::process::{Command, Output};

use hsmd::synthetic::MovingSquare;

fn hsmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsmd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn run_writes_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("seq");
    std::fs::create_dir(&src).unwrap();
    let scene = MovingSquare {
        frames: 5,
        ..MovingSquare::default()
    };
    for t in 0..5 {
        image::GrayImage::from_raw(64, 64, scene.gray(t).into_data())
            .unwrap()
            .save(src.join(format!("{t:03}.png")))
            .unwrap();
    }
    let out = tmp.path().join("out");
    let o = hsmd(&[
        "run",
        "--source",
        s(&src),
        "--bs",
        "frame-diff",
        "--threads",
        "2",
        "--seed",
        "7",
        "--out",
        s(&out),
        "--dump-masks",
        "--set",
        "filter.threshold=100",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("5 frames"));
    assert!(out.join("bin000005.png").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_report.json")).unwrap()).unwrap();
    assert_eq!(report["frames"], 5);
    assert_eq!(report["threads"], 2);
}

#[test]
fn invalid_config_exits_nonzero_naming_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[neuron]\nv_threshold = -80.0\n").unwrap();
    let o = hsmd(&["run", "--source", s(tmp.path()), "--config", s(&cfg)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("neuron.v_threshold") && err.contains("neuron.v_reset"), "{err}");
}

#[test]
fn parse_error_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\nthreads = = 2\n").unwrap();
    let o = hsmd(&["run", "--source", s(tmp.path()), "--config", s(&cfg)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn missing_source_and_device_fail() {
    let o = hsmd(&["run", "--source", "/definitely/not/here"]);
    assert!(!o.status.success());
    let o = hsmd(&["run", "--source", "0"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("live capture"));
}

#[test]
fn rank_fixture_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hsmd(&["rank", "--fixtures", &fixture("cdnet2012_overall.csv"), "--out", s(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let first = stdout.lines().nth(1).unwrap();
    assert!(first.trim_start().starts_with("HSMD"), "{stdout}");
    let ranking = std::fs::read_to_string(tmp.path().join("ranking.csv")).unwrap();
    assert!(ranking.starts_with("Method,overall,RC"));
}

#[test]
fn bench_smoke_and_empty_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("ds");
    let scene = MovingSquare {
        frames: 8,
        ..MovingSquare::default()
    };
    scene.write_cdnet(&root, "baseline", "a", 2).unwrap();
    scene.write_cdnet(&root, "shadow", "b", 2).unwrap();
    let out = tmp.path().join("out");
    let o = hsmd(&[
        "bench",
        "--dataset",
        s(&root),
        "--categories",
        "baseline,shadow",
        "--format",
        "csv",
        "--out",
        s(&out),
        "--bs",
        "frame-diff",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("overall.csv").is_file());
    assert!(!out.join("overall.json").exists());

    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = hsmd(&["bench", "--dataset", s(&empty), "--out", s(&out)]);
    assert!(!o.status.success());
}

#[test]
fn bench_reports_failed_videos_with_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("ds");
    let scene = MovingSquare {
        frames: 4,
        ..MovingSquare::default()
    };
    scene.write_cdnet(&root, "baseline", "good", 1).unwrap();
    let bad = scene.write_cdnet(&root, "baseline", "bad", 1).unwrap();
    // an illegal ground-truth value aborts that video only
    image::GrayImage::from_pixel(64, 64, image::Luma([7]))
        .save(bad.join("groundtruth/gt000002.png"))
        .unwrap();
    let out = tmp.path().join("out");
    let o = hsmd(&["bench", "--dataset", s(&root), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("baseline/bad"));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"bad\""));
}
