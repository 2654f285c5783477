use std::path::Path;

use hsmd::bench::{bench, BenchOptions};
use hsmd::config::{load_config, Override, PipelineConfig, Source};
use hsmd::frame::load_gray;
use hsmd::subtraction::BsMode;
use hsmd::synthetic::MovingSquare;
use hsmd::{run, Error};

fn write_sequence(dir: &Path, frames: usize) {
    let scene = MovingSquare {
        frames,
        ..MovingSquare::default()
    };
    std::fs::create_dir_all(dir).unwrap();
    for t in 0..frames {
        let g = scene.gray(t);
        image::GrayImage::from_raw(64, 64, g.into_data())
            .unwrap()
            .save(dir.join(format!("frame{:04}.png", t + 1)))
            .unwrap();
    }
}

fn config(src: &Path, out: &Path, threads: usize) -> PipelineConfig {
    PipelineConfig {
        source: Some(Source::Sequence(src.to_path_buf())),
        output_dir: Some(out.to_path_buf()),
        dump_masks: true,
        threads,
        ..PipelineConfig::default()
    }
}

fn read_masks(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("bin"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn ten_frames_ten_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("seq");
    write_sequence(&src, 10);
    let out = tmp.path().join("out");
    let report = run(&config(&src, &out, 2)).unwrap();
    assert_eq!(report.frames, 10);
    assert_eq!(report.masks_written, 10);
    assert_eq!((report.width, report.height), (64, 64));
    assert!((report.fps - 1000.0 / report.mean_ms).abs() < 1e-6);
    let masks = read_masks(&out);
    assert_eq!(masks.len(), 10);
    assert_eq!(masks[0].0, "bin000001.png");
    let m = load_gray(out.join("bin000010.png")).unwrap();
    assert!(m.data().iter().all(|&v| v == 0 || v == 255));
    assert!(out.join("run_report.json").is_file());
    assert!(out.join("run_report.csv").is_file());
}

#[test]
fn masks_are_byte_identical_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("seq");
    write_sequence(&src, 12);
    let mut outputs = Vec::new();
    for (i, threads) in [1, 1, 8].into_iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        run(&config(&src, &out, threads)).unwrap();
        outputs.push(read_masks(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let last = load_gray(tmp.path().join("out0/bin000012.png")).unwrap();
    assert!(last.data().contains(&255), "no motion detected");
}

#[test]
fn layer_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("seq");
    write_sequence(&src, 3);
    let out = tmp.path().join("out");
    let mut cfg = config(&src, &out, 1);
    cfg.dump_layers = true;
    run(&cfg).unwrap();
    for layer in [2, 3, 4] {
        assert!(out.join(format!("layers/l{layer}_000003.png")).is_file());
    }
}

#[test]
fn unreachable_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig {
        source: Some(Source::Sequence(tmp.path().join("missing"))),
        ..PipelineConfig::default()
    };
    assert!(matches!(run(&cfg), Err(Error::NotFound(_))));
    cfg.source = Some(Source::Device(0));
    assert!(matches!(run(&cfg), Err(Error::UnsupportedSource(_))));
    cfg.source = None;
    assert!(matches!(run(&cfg), Err(Error::InvalidConfig(_))));
}

fn two_category_dataset(root: &Path) {
    let scene = MovingSquare {
        frames: 12,
        ..MovingSquare::default()
    };
    scene.write_cdnet(root, "baseline", "highway", 3).unwrap();
    scene.write_cdnet(root, "thermal", "corridor", 1).unwrap();
}

#[test]
fn bench_two_categories_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("ds");
    two_category_dataset(&root);
    let mut cfg = PipelineConfig::default();
    cfg.background.mode = BsMode::FrameDiff;
    let run_once = |name: &str| {
        let mut opts = BenchOptions::new(&root);
        opts.output_dir = Some(tmp.path().join(name));
        bench(&cfg, &opts).unwrap()
    };
    let a = run_once("a");
    let b = run_once("b");
    assert_eq!(a.categories.len(), 2);
    assert_eq!(a.categories[0].category, "baseline");
    assert_eq!(a.categories[0].videos[0].frames.len(), 10);
    assert_eq!(a.categories[1].videos[0].frames.len(), 12);
    assert_eq!(a.categories, b.categories);
    for f in ["videos.csv", "categories.csv", "overall.csv", "ranking.csv", "ranks.csv", "videos.json", "ranking.json"] {
        let x = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    // accumulated confusion equals the sum over frames
    for v in a.videos() {
        let sum: hsmd::Confusion = v.frames.iter().map(|f| f.confusion).sum();
        assert_eq!(sum, v.confusion);
    }
}

#[test]
fn bench_category_filter_and_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("ds");
    two_category_dataset(&root);
    let baseline = tmp.path().join("baseline.csv");
    std::fs::write(
        &baseline,
        "category,method,Re,Sp,FPR,FNR,WCR,CCR,Pr,F1\n\
         thermal,Other,0.1,0.5,0.5,0.9,0.5,0.5,0.1,0.1\n\
         baseline,Other,0.1,0.5,0.5,0.9,0.5,0.5,0.1,0.1\n",
    )
    .unwrap();
    let mut opts = BenchOptions::new(&root);
    opts.categories = Some(vec!["thermal".into()]);
    opts.baseline = Some(baseline);
    opts.output_dir = Some(tmp.path().join("out"));
    let mut cfg = PipelineConfig::default();
    cfg.background.mode = BsMode::FrameDiff;
    let r = bench(&cfg, &opts).unwrap();
    assert_eq!(r.categories.len(), 1);
    assert_eq!(r.ranking.across.categories, ["thermal"]);
    assert_eq!(r.ranking.across.entries.len(), 2);
    assert!(r.overall.rc.is_some());
}

#[test]
fn bench_without_videos_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let opts = BenchOptions::new(tmp.path());
    assert!(matches!(
        bench(&PipelineConfig::default(), &opts),
        Err(Error::EmptyDataset(_))
    ));
    // a video without temporalROI.txt is skipped, leaving nothing
    let scene = MovingSquare {
        frames: 3,
        ..MovingSquare::default()
    };
    let dir = scene.write_cdnet(tmp.path(), "baseline", "v", 1).unwrap();
    std::fs::remove_file(dir.join("temporalROI.txt")).unwrap();
    let found = hsmd::cdnet::discover(tmp.path()).unwrap();
    assert!(found.videos.is_empty());
    assert_eq!(found.skipped.len(), 1);
    assert!(bench(&PipelineConfig::default(), &opts).is_err());
}

#[test]
fn discovery_accepts_category_and_video_roots() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("ds");
    two_category_dataset(&root);
    assert_eq!(hsmd::discover_dataset(&root).unwrap().len(), 2);
    let cat = hsmd::discover_dataset(&root.join("baseline")).unwrap();
    assert_eq!(cat.len(), 1);
    assert_eq!(cat[0].category, "baseline");
    let video = hsmd::discover_dataset(&root.join("baseline/highway")).unwrap();
    assert_eq!(video[0].video, "highway");
    assert_eq!(video[0].temporal_roi, (3, 12));
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("cfg.toml");
    std::fs::write(&p, "threads = 3\n[snn]\nc = 10.0\n[neuron]\nt_ref = 5.0\n").unwrap();
    let cfg = load_config(Some(&p), &[Override::new("snn.c", 17.5)]).unwrap();
    assert_eq!(cfg.threads, 3);
    assert_eq!(cfg.snn.c, 17.5);
    assert_eq!(cfg.neuron.t_ref, 5.0);
}
