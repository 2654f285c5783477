//! CSV and JSON report writers.
//!
//! Metric cells use six decimals; undefined values are written as `-`,
//! which [`read_metric_rows`](crate::ranking::read_metric_rows) reads back
//! as undefined.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::cdnet::{CategoryResult, VideoResult};
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricSet};
use crate::pipeline::RunReport;
use crate::ranking::{MetricRow, RankingReport};

pub fn format_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "-".to_string(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Encode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .flush()
        .map_err(|e| Error::io(path, e))
}

fn metric_cells(m: &MetricSet) -> impl Iterator<Item = String> + '_ {
    Metric::ALL.into_iter().map(|k| format_metric(m.get(k)))
}

fn metric_names() -> impl Iterator<Item = &'static str> {
    Metric::ALL.into_iter().map(Metric::name)
}

/// Pretty-printed JSON.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// One header row and one value row.
pub fn write_run_csv(path: &Path, r: &RunReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record([
        "frames",
        "width",
        "height",
        "threads",
        "mean_ms",
        "p50_ms",
        "p95_ms",
        "max_ms",
        "fps",
        "grayscale_ms",
        "background_ms",
        "snn_ms",
        "filter_ms",
        "mean_spike_rate",
        "mean_foreground",
        "masks_written",
    ])
    .map_err(&err)?;
    let f = |x: f64| format!("{x:.4}");
    w.write_record([
        r.frames.to_string(),
        r.width.to_string(),
        r.height.to_string(),
        r.threads.to_string(),
        f(r.mean_ms),
        f(r.p50_ms),
        f(r.p95_ms),
        f(r.max_ms),
        f(r.fps),
        f(r.stages.grayscale_ms),
        f(r.stages.background_ms),
        f(r.stages.snn_ms),
        f(r.stages.filter_ms),
        format!("{:.6}", r.mean_spike_rate),
        format!("{:.6}", r.mean_foreground),
        r.masks_written.to_string(),
    ])
    .map_err(&err)?;
    finish(path, w)
}

/// `category, video, frames, TP, TN, FP, FN, <metrics>`
pub fn write_videos_csv(path: &Path, videos: &[VideoResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let header: Vec<&str> = ["category", "video", "frames", "TP", "TN", "FP", "FN"]
        .into_iter()
        .chain(metric_names())
        .collect();
    w.write_record(&header).map_err(&err)?;
    for v in videos {
        let c = v.confusion;
        let row: Vec<String> = [
            v.category.clone(),
            v.video.clone(),
            v.frames.len().to_string(),
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
        ]
        .into_iter()
        .chain(metric_cells(&v.metrics))
        .collect();
        w.write_record(&row).map_err(&err)?;
    }
    finish(path, w)
}

/// Two rows per category: `pooled` (summed confusion) and `mean` (mean of
/// per-video metrics).
pub fn write_categories_csv(path: &Path, categories: &[CategoryResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let header: Vec<&str> = ["category", "aggregation", "videos"]
        .into_iter()
        .chain(metric_names())
        .collect();
    w.write_record(&header).map_err(&err)?;
    for c in categories {
        for (kind, m) in [("pooled", &c.pooled_metrics), ("mean", &c.mean_metrics)] {
            let row: Vec<String> = [c.category.clone(), kind.to_string(), c.videos.len().to_string()]
                .into_iter()
                .chain(metric_cells(m))
                .collect();
            w.write_record(&row).map_err(&err)?;
        }
    }
    finish(path, w)
}

/// A method row of an overall table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverallRow {
    pub method: String,
    pub rc: Option<f64>,
    pub metrics: MetricSet,
}

/// Column order of the published overall tables.
pub const OVERALL_COLUMNS: [&str; 10] = ["Method", "RC", "Re", "Sp", "FPR", "FNR", "WCR", "CCR", "F1", "Pr"];

/// `Method, RC, Re, Sp, FPR, FNR, WCR, CCR, F1, Pr`
pub fn write_overall_csv(path: &Path, rows: &[OverallRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(OVERALL_COLUMNS).map_err(&err)?;
    for r in rows {
        let m = &r.metrics;
        let cells = [
            r.method.clone(),
            r.rc.map_or_else(|| "-".into(), |v| format!("{v:.4}")),
            format_metric(m.re),
            format_metric(m.sp),
            format_metric(m.fpr),
            format_metric(m.fnr),
            format_metric(m.wcr),
            format_metric(m.ccr),
            format_metric(m.f1),
            format_metric(m.pr),
        ];
        w.write_record(&cells).map_err(&err)?;
    }
    finish(path, w)
}

/// `category, method, <metrics>`: readable by the `rank` command.
pub fn write_metric_rows_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let header: Vec<&str> = ["category", "method"].into_iter().chain(metric_names()).collect();
    w.write_record(&header).map_err(&err)?;
    for r in rows {
        let row: Vec<String> = [r.category.clone(), r.method.clone()]
            .into_iter()
            .chain(metric_cells(&r.metrics))
            .collect();
        w.write_record(&row).map_err(&err)?;
    }
    finish(path, w)
}

/// Methods as rows, categories as columns (R per category), then RC.
pub fn write_ranking_csv(path: &Path, report: &RankingReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let mut header = vec!["Method".to_string()];
    header.extend(report.across.categories.iter().cloned());
    header.push("RC".into());
    w.write_record(&header).map_err(&err)?;
    let mut entries: Vec<_> = report.across.entries.iter().collect();
    entries.sort_by(|a, b| a.rc.total_cmp(&b.rc));
    for e in entries {
        let mut row = vec![e.method.clone()];
        row.extend(e.per_category.iter().map(|r| format!("{r:.4}")));
        row.push(format!("{:.4}", e.rc));
        w.write_record(&row).map_err(&err)?;
    }
    finish(path, w)
}

/// Per-metric ranks for every category: `category, method, <metric ranks>, R`.
pub fn write_ranks_csv(path: &Path, report: &RankingReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let mut header: Vec<&str> = vec!["category", "method"];
    header.extend(metric_names());
    header.push("R");
    w.write_record(&header).map_err(&err)?;
    for (category, table) in &report.categories {
        for e in &table.entries {
            let mut row = vec![category.clone(), e.method.clone()];
            row.extend(e.ranks.iter().map(|r| format!("{r:.4}")));
            row.push(format!("{:.4}", e.r));
            w.write_record(&row).map_err(&err)?;
        }
    }
    finish(path, w)
}

/// `category, video, frames, mean_ms, fps`
pub fn write_timing_csv(path: &Path, videos: &[VideoResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["category", "video", "frames", "mean_ms", "fps"])
        .map_err(&err)?;
    for v in videos {
        let mean = v.mean_ms();
        let fps = if mean > 0.0 { 1000.0 / mean } else { 0.0 };
        w.write_record([
            v.category.clone(),
            v.video.clone(),
            v.frames_processed.to_string(),
            format!("{mean:.4}"),
            format!("{fps:.2}"),
        ])
        .map_err(&err)?;
    }
    finish(path, w)
}
