//! The `bench` command: every video of a CDnet-layout dataset, per-category
//! and overall reports, and optional ranking against published baselines.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cdnet::{discover, group_by_category, run_video, CategoryResult, Skipped, VideoResult};
use crate::config::{PipelineConfig, ReportFormat};
use crate::error::{Error, Result};
use crate::metrics::MetricSet;
use crate::pipeline::create_dir;
use crate::ranking::{rank_rows, read_metric_rows, MetricDirections, MetricRow, RankingReport};
use crate::report::{self, OverallRow};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    pub dataset: PathBuf,
    /// Only these categories, when set.
    pub categories: Option<Vec<String>>,
    pub formats: Vec<ReportFormat>,
    pub output_dir: Option<PathBuf>,
    /// Name of this detector in reports and rankings.
    pub method: String,
    /// Metric rows (`category, method, <metrics>`) of other methods to rank
    /// against. Rows for categories not benchmarked are ignored.
    pub baseline: Option<PathBuf>,
    /// Write scored masks under `<output_dir>/masks/<category>/<video>/`.
    pub dump_masks: bool,
}

impl BenchOptions {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        BenchOptions {
            dataset: dataset.into(),
            categories: None,
            formats: vec![ReportFormat::Csv, ReportFormat::Json],
            output_dir: None,
            method: "HSMD".into(),
            baseline: None,
            dump_masks: false,
        }
    }
}

/// A video that failed to run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub category: String,
    pub video: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub method: String,
    pub categories: Vec<CategoryResult>,
    /// Mean over categories of the mean-of-video metrics, with RC when a
    /// ranking was computed.
    pub overall: OverallRow,
    pub ranking: RankingReport,
    pub skipped: Vec<Skipped>,
    pub failures: Vec<Failure>,
}

impl BenchReport {
    pub fn videos(&self) -> impl Iterator<Item = &VideoResult> {
        self.categories.iter().flat_map(|c| &c.videos)
    }

    /// This method's rows in the layout [`read_metric_rows`] accepts.
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        self.categories
            .iter()
            .map(|c| MetricRow {
                category: c.category.clone(),
                method: self.method.clone(),
                metrics: c.mean_metrics,
            })
            .collect()
    }
}

/// Runs the benchmark and, when `opts.output_dir` is set, writes:
///
/// | file | content |
/// |------|---------|
/// | `videos.{csv,json}` | per-video confusion and metrics |
/// | `categories.{csv,json}` | pooled and mean-of-video metrics per category |
/// | `overall.{csv,json}` | one row per method: `Method, RC, Re, Sp, FPR, FNR, WCR, CCR, F1, Pr` |
/// | `category_metrics.csv` | `category, method, <metrics>` for every ranked row |
/// | `ranking.{csv,json}` | R per category and RC per method |
/// | `ranks.csv` | per-metric ranks within each category |
/// | `timing.{csv,json}` | ms per frame for each video |
/// | `summary.json` | skipped videos and failures |
///
/// Timing lives in its own files so the others are reproducible byte for
/// byte.
pub fn bench(cfg: &PipelineConfig, opts: &BenchOptions) -> Result<BenchReport> {
    cfg.validate()?;
    let found = discover(&opts.dataset)?;
    let entries: Vec<_> = found
        .videos
        .into_iter()
        .filter(|v| opts.categories.as_ref().is_none_or(|cs| cs.contains(&v.category)))
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyDataset(opts.dataset.clone()));
    }
    if let Some(dir) = &opts.output_dir {
        create_dir(dir)?;
    }

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for entry in &entries {
        log::info!("{}/{}", entry.category, entry.video);
        let mask_dir = match (&opts.output_dir, opts.dump_masks) {
            (Some(d), true) => Some(d.join("masks").join(&entry.category).join(&entry.video)),
            _ => None,
        };
        match run_video(entry, cfg, mask_dir.as_deref()) {
            Ok(r) => results.push(r),
            Err(e) => {
                log::error!("{}/{} failed: {e}", entry.category, entry.video);
                failures.push(Failure {
                    category: entry.category.clone(),
                    video: entry.video.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    if results.is_empty() {
        return Err(Error::EmptyDataset(opts.dataset.clone()));
    }
    let categories = group_by_category(results);

    let mut partial = BenchReport {
        method: opts.method.clone(),
        overall: OverallRow {
            method: opts.method.clone(),
            rc: None,
            metrics: MetricSet::mean(categories.iter().map(|c| &c.mean_metrics)),
        },
        categories,
        ranking: RankingReport {
            categories: Vec::new(),
            across: crate::ranking::CrossCategoryRank {
                categories: Vec::new(),
                entries: Vec::new(),
            },
        },
        skipped: found.skipped,
        failures,
    };
    let mut rows = partial.metric_rows();
    if let Some(path) = &opts.baseline {
        let benched: Vec<String> = partial.categories.iter().map(|c| c.category.clone()).collect();
        rows.extend(
            read_metric_rows(path)?
                .into_iter()
                .filter(|r| benched.contains(&r.category) && r.method != opts.method),
        );
    }
    partial.ranking = rank_rows(&rows, &MetricDirections::default())?;
    partial.overall.rc = partial.ranking.across.get(&opts.method).map(|e| e.rc);

    if let Some(dir) = &opts.output_dir {
        write_reports(dir, &partial, &rows, &opts.formats)?;
    }
    Ok(partial)
}

fn overall_rows(report: &BenchReport, rows: &[MetricRow]) -> Vec<OverallRow> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut out: Vec<OverallRow> = methods
        .into_iter()
        .map(|m| OverallRow {
            method: m.to_string(),
            rc: report.ranking.across.get(m).map(|e| e.rc),
            metrics: MetricSet::mean(rows.iter().filter(|r| r.method == m).map(|r| &r.metrics)),
        })
        .collect();
    out.sort_by(|a, b| {
        a.rc.unwrap_or(f64::INFINITY)
            .total_cmp(&b.rc.unwrap_or(f64::INFINITY))
    });
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    method: &'a str,
    videos: usize,
    categories: usize,
    skipped: &'a [Skipped],
    failures: &'a [Failure],
}

#[derive(Serialize)]
struct VideoTiming<'a> {
    category: &'a str,
    video: &'a str,
    frames: usize,
    mean_ms: f64,
    frame_ms: &'a [f64],
}

fn write_reports(dir: &Path, report: &BenchReport, rows: &[MetricRow], formats: &[ReportFormat]) -> Result<()> {
    let videos: Vec<VideoResult> = report.videos().cloned().collect();
    let overall = overall_rows(report, rows);
    let timing: Vec<VideoTiming> = videos
        .iter()
        .map(|v| VideoTiming {
            category: &v.category,
            video: &v.video,
            frames: v.frames_processed,
            mean_ms: v.mean_ms(),
            frame_ms: &v.frame_ms,
        })
        .collect();
    if formats.contains(&ReportFormat::Csv) {
        report::write_videos_csv(&dir.join("videos.csv"), &videos)?;
        report::write_categories_csv(&dir.join("categories.csv"), &report.categories)?;
        report::write_overall_csv(&dir.join("overall.csv"), &overall)?;
        report::write_metric_rows_csv(&dir.join("category_metrics.csv"), rows)?;
        report::write_ranking_csv(&dir.join("ranking.csv"), &report.ranking)?;
        report::write_ranks_csv(&dir.join("ranks.csv"), &report.ranking)?;
        report::write_timing_csv(&dir.join("timing.csv"), &videos)?;
    }
    if formats.contains(&ReportFormat::Json) {
        report::write_json(&dir.join("videos.json"), &videos)?;
        report::write_json(&dir.join("categories.json"), &report.categories)?;
        report::write_json(&dir.join("overall.json"), &overall)?;
        report::write_json(&dir.join("ranking.json"), &report.ranking)?;
        report::write_json(&dir.join("timing.json"), &timing)?;
    }
    report::write_json(
        &dir.join("summary.json"),
        &Summary {
            method: &report.method,
            videos: videos.len(),
            categories: report.categories.len(),
            skipped: &report.skipped,
            failures: &report.failures,
        },
    )
}
