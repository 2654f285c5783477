//! CDnet-layout datasets: ground-truth semantics, discovery and per-video
//! evaluation.
//!
//! On-disk layout (`ROOT` may be the dataset, a single category, or a
//! single video directory):
//!
//! ```text
//! ROOT/<category>/<video>/input/in000001.jpg ...
//!                        /groundtruth/gt000001.png ...
//!                        /temporalROI.txt      "first last"
//!                        /ROI.bmp              optional spatial ROI
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::frame::{load_frame, load_gray, write_mask, GrayFrame, MaskFrame, Plane};
use crate::metrics::{compute_metrics, Confusion, MetricSet};
use crate::pipeline::{create_dir, mask_name, Pipeline};
use crate::source::{frame_number, list_images};

/// Ground-truth pixel classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Static,
    Shadow,
    NonRoi,
    Unknown,
    Moving,
}

impl Label {
    pub fn from_value(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Static),
            50 => Some(Label::Shadow),
            85 => Some(Label::NonRoi),
            170 => Some(Label::Unknown),
            255 => Some(Label::Moving),
            _ => None,
        }
    }

    pub fn value(self) -> u8 {
        match self {
            Label::Static => 0,
            Label::Shadow => 50,
            Label::NonRoi => 85,
            Label::Unknown => 170,
            Label::Moving => 255,
        }
    }
}

/// A ground-truth frame holding only the five legal label values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelFrame(GrayFrame);

impl LabelFrame {
    pub fn new(plane: GrayFrame) -> Result<Self> {
        if let Some(i) = plane.data().iter().position(|&v| Label::from_value(v).is_none()) {
            return Err(Error::IllegalLabel {
                value: plane.data()[i],
                x: i % plane.width(),
                y: i / plane.width(),
            });
        }
        Ok(LabelFrame(plane))
    }

    pub fn from_labels(width: usize, height: usize, f: impl Fn(usize, usize) -> Label) -> Self {
        LabelFrame(Plane::from_fn(width, height, |x, y| f(x, y).value()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(load_gray(path)?)
    }

    pub fn plane(&self) -> &GrayFrame {
        &self.0
    }

    pub fn dimensions(&self) -> (usize, usize) {
        self.0.dimensions()
    }

    pub fn label(&self, x: usize, y: usize) -> Label {
        Label::from_value(self.0.data()[self.0.index_of(x, y)]).expect("validated")
    }
}

/// Spatial region of interest: `true` pixels are evaluated.
pub type RoiMask = Plane<bool>;

/// Reads an ROI image; pixels brighter than mid-grey are inside.
pub fn load_roi(path: &Path) -> Result<RoiMask> {
    Ok(load_gray(path)?.map(|&v| v > 127))
}

/// Scores one predicted mask.
///
/// Moving pixels are positives; static and shadow pixels are negatives;
/// non-ROI, unknown and ROI-excluded pixels are skipped.
pub fn frame_confusion(pred: &MaskFrame, gt: &LabelFrame, roi: Option<&RoiMask>) -> Result<Confusion> {
    pred.plane().ensure_same_size(gt.plane())?;
    if let Some(r) = roi {
        gt.plane().ensure_same_size(r)?;
    }
    let mut c = Confusion::default();
    for (i, (&p, &g)) in pred.data().iter().zip(gt.plane().data()).enumerate() {
        if roi.is_some_and(|r| !r.data()[i]) {
            continue;
        }
        let positive = p == MaskFrame::FOREGROUND;
        match Label::from_value(g).expect("validated") {
            Label::NonRoi | Label::Unknown => {}
            Label::Moving if positive => c.tp += 1,
            Label::Moving => c.fn_ += 1,
            Label::Static | Label::Shadow if positive => c.fp += 1,
            Label::Static | Label::Shadow => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub category: String,
    pub video: String,
    pub input_dir: PathBuf,
    pub groundtruth_dir: PathBuf,
    /// First and last scored frame numbers, inclusive.
    pub temporal_roi: (u64, u64),
    pub roi: Option<PathBuf>,
}

/// A video left out of the dataset and why.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discovery {
    pub videos: Vec<VideoEntry>,
    pub skipped: Vec<Skipped>,
}

pub fn parse_temporal_roi(text: &str) -> Option<(u64, u64)> {
    let mut it = text.split_whitespace().map(str::parse::<u64>);
    match (it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b))) if a <= b => Some((a, b)),
        _ => None,
    }
}

fn has_input(dir: &Path) -> bool {
    dir.join("input").is_dir()
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

fn name_of(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn inspect_video(category: &str, dir: &Path) -> Result<VideoEntry, String> {
    let groundtruth_dir = dir.join("groundtruth");
    if !groundtruth_dir.is_dir() {
        return Err("missing groundtruth directory".into());
    }
    let roi_file = dir.join("temporalROI.txt");
    let text = std::fs::read_to_string(&roi_file).map_err(|_| "missing temporalROI.txt".to_string())?;
    let temporal_roi =
        parse_temporal_roi(&text).ok_or_else(|| format!("malformed temporalROI.txt: {:?}", text.trim()))?;
    let input_dir = dir.join("input");
    let inputs = list_images(&input_dir, "in").map_err(|e| e.to_string())?;
    let last_input = inputs.iter().filter_map(|p| frame_number(p)).max().unwrap_or(0);
    if last_input < temporal_roi.1 {
        return Err(format!(
            "temporal ROI ends at frame {} but the last input frame is {last_input}",
            temporal_roi.1
        ));
    }
    let roi = ["ROI.bmp", "ROI.png", "ROI.jpg"]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file());
    Ok(VideoEntry {
        category: category.to_string(),
        video: name_of(dir),
        input_dir,
        groundtruth_dir,
        temporal_roi,
        roi,
    })
}

/// Walks `root`, which may be a dataset, a category or a single video.
pub fn discover(root: &Path) -> Result<Discovery> {
    if !root.is_dir() {
        return Err(Error::NotFound(root.to_path_buf()));
    }
    let mut candidates: Vec<(String, PathBuf)> = Vec::new();
    if has_input(root) {
        let category = root.parent().map(name_of).unwrap_or_default();
        candidates.push((category, root.to_path_buf()));
    } else {
        let children = subdirs(root)?;
        if children.iter().any(|c| has_input(c)) {
            let category = name_of(root);
            candidates.extend(children.into_iter().filter(|c| has_input(c)).map(|c| (category.clone(), c)));
        } else {
            for cat in children {
                let category = name_of(&cat);
                for video in subdirs(&cat)?.into_iter().filter(|v| has_input(v)) {
                    candidates.push((category.clone(), video));
                }
            }
        }
    }
    let mut found = Discovery::default();
    for (category, dir) in candidates {
        match inspect_video(&category, &dir) {
            Ok(v) => found.videos.push(v),
            Err(reason) => {
                log::warn!("skipping {}: {reason}", dir.display());
                found.skipped.push(Skipped { path: dir, reason });
            }
        }
    }
    Ok(found)
}

/// The usable videos under `root`; skipped ones are logged.
pub fn discover_dataset(root: &Path) -> Result<Vec<VideoEntry>> {
    discover(root).map(|d| d.videos)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameScore {
    pub frame: u64,
    pub confusion: Confusion,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VideoResult {
    pub category: String,
    pub video: String,
    pub frames_processed: usize,
    /// Sum of `frames`.
    pub confusion: Confusion,
    pub metrics: MetricSet,
    pub frames: Vec<FrameScore>,
    /// Wall-clock ms per processed frame. Ignored by `==` and left out of
    /// the serialized result; timing has its own reports.
    #[serde(skip)]
    pub frame_ms: Vec<f64>,
}

impl PartialEq for VideoResult {
    fn eq(&self, o: &Self) -> bool {
        self.category == o.category
            && self.video == o.video
            && self.frames_processed == o.frames_processed
            && self.confusion == o.confusion
            && self.metrics == o.metrics
            && self.frames == o.frames
    }
}

impl VideoResult {
    pub fn mean_ms(&self) -> f64 {
        if self.frame_ms.is_empty() {
            0.0
        } else {
            self.frame_ms.iter().sum::<f64>() / self.frame_ms.len() as f64
        }
    }
}

/// Runs the detector over every input frame up to the end of the temporal
/// ROI and scores the frames inside it. Frames before the ROI only warm the
/// background model. When `mask_dir` is given, each scored mask is written
/// there as `binNNNNNN.png`.
pub fn run_video(entry: &VideoEntry, cfg: &PipelineConfig, mask_dir: Option<&Path>) -> Result<VideoResult> {
    let inputs = list_images(&entry.input_dir, "in")?;
    let roi = entry.roi.as_deref().map(load_roi).transpose()?;
    let (first, last) = entry.temporal_roi;
    if let Some(dir) = mask_dir {
        create_dir(dir)?;
    }
    let mut pipeline = Pipeline::new(cfg)?;
    let mut frames = Vec::new();
    let mut frame_ms = Vec::new();
    for path in inputs {
        let Some(n) = frame_number(&path) else {
            continue;
        };
        if n > last {
            break;
        }
        let t = Instant::now();
        let out = pipeline.process(&load_frame(&path)?)?;
        frame_ms.push(t.elapsed().as_secs_f64() * 1e3);
        if n < first {
            continue;
        }
        let gt_path = entry.groundtruth_dir.join(format!("gt{n:06}.png"));
        let gt = LabelFrame::load(&gt_path)?;
        let confusion = frame_confusion(&out.mask, &gt, roi.as_ref())?;
        frames.push(FrameScore { frame: n, confusion });
        if let Some(dir) = mask_dir {
            write_mask(&out.mask, dir.join(mask_name(n as usize)))?;
        }
    }
    let confusion: Confusion = frames.iter().map(|f| f.confusion).sum();
    Ok(VideoResult {
        category: entry.category.clone(),
        video: entry.video.clone(),
        frames_processed: frame_ms.len(),
        confusion,
        metrics: compute_metrics(&confusion),
        frames,
        frame_ms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryResult {
    pub category: String,
    pub videos: Vec<VideoResult>,
    /// Confusion summed over all videos.
    pub pooled: Confusion,
    pub pooled_metrics: MetricSet,
    /// Unweighted mean of the per-video metrics.
    pub mean_metrics: MetricSet,
}

impl CategoryResult {
    pub fn from_videos(category: impl Into<String>, videos: Vec<VideoResult>) -> Self {
        let pooled: Confusion = videos.iter().map(|v| v.confusion).sum();
        let mean_metrics = MetricSet::mean(videos.iter().map(|v| &v.metrics));
        CategoryResult {
            category: category.into(),
            pooled,
            pooled_metrics: compute_metrics(&pooled),
            mean_metrics,
            videos,
        }
    }
}

/// Groups video results by category, keeping first-seen category order.
pub fn group_by_category(videos: Vec<VideoResult>) -> Vec<CategoryResult> {
    let mut groups: Vec<(String, Vec<VideoResult>)> = Vec::new();
    for v in videos {
        match groups.iter_mut().find(|(c, _)| *c == v.category) {
            Some((_, g)) => g.push(v),
            None => groups.push((v.category.clone(), vec![v])),
        }
    }
    groups
        .into_iter()
        .map(|(c, g)| CategoryResult::from_videos(c, g))
        .collect()
}
