//! Per-frame orchestration and the `run` entry point.
//!
//! grayscale → background subtraction → current encoding → L2–L4
//! simulation → averaging filter → normalisation → binarisation

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, ReportFormat, Source};
use crate::error::{Error, Result};
use crate::frame::{rescale, to_grayscale, write_gray_png, write_mask, GrayFrame, MaskFrame, RgbFrame};
use crate::postfilter::{postprocess, FilterConfig};
use crate::report;
use crate::snn::{Network, NeuronParams, SpikeCountField, SynapseWeights};
use crate::source;
use crate::subtraction::{BackgroundSubtractor, DiffFrame};

/// Wall-clock time per stage, in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub grayscale_ms: f64,
    pub background_ms: f64,
    pub snn_ms: f64,
    pub filter_ms: f64,
}

impl StageTiming {
    pub fn total_ms(&self) -> f64 {
        self.grayscale_ms + self.background_ms + self.snn_ms + self.filter_ms
    }

    fn add(&mut self, o: &StageTiming) {
        self.grayscale_ms += o.grayscale_ms;
        self.background_ms += o.background_ms;
        self.snn_ms += o.snn_ms;
        self.filter_ms += o.filter_ms;
    }

    fn scaled(&self, k: f64) -> StageTiming {
        StageTiming {
            grayscale_ms: self.grayscale_ms * k,
            background_ms: self.background_ms * k,
            snn_ms: self.snn_ms * k,
            filter_ms: self.filter_ms * k,
        }
    }
}

/// Everything one frame produced.
#[derive(Clone, Debug)]
pub struct FrameOutput {
    pub diff: DiffFrame,
    pub spikes: SpikeCountField,
    pub mask: MaskFrame,
    pub timing: StageTiming,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// A detector instance. Frames must be fed in order; the spiking network is
/// sized from the first frame.
pub struct Pipeline {
    subtractor: BackgroundSubtractor,
    network: Option<Network>,
    neuron: NeuronParams,
    weights: SynapseWeights,
    conversion: f64,
    substeps: usize,
    filter: FilterConfig,
    scale: f64,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    pub fn new(cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidConfig(vec![format!("threads: {e}")]))?;
        Ok(Pipeline {
            subtractor: BackgroundSubtractor::new(&cfg.background.to_bs_config(), cfg.seed),
            network: None,
            neuron: cfg.neuron.clone(),
            weights: cfg.snn.weights(),
            conversion: cfg.snn.c,
            substeps: cfg.snn.substeps,
            filter: cfg.filter.clone(),
            scale: cfg.scale,
            pool,
        })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn network(&self) -> Option<&Network> {
        self.network.as_ref()
    }

    pub fn process(&mut self, frame: &RgbFrame) -> Result<FrameOutput> {
        let t = Instant::now();
        let gray = self.pool.install(|| rescale(&to_grayscale(frame), self.scale));
        let grayscale_ms = ms_since(t);
        let mut out = self.process_gray(&gray)?;
        out.timing.grayscale_ms = grayscale_ms;
        Ok(out)
    }

    pub fn process_gray(&mut self, gray: &GrayFrame) -> Result<FrameOutput> {
        let Pipeline {
            subtractor,
            network,
            pool,
            ..
        } = self;
        pool.install(|| {
            let t = Instant::now();
            let diff = subtractor.apply(gray)?;
            let background_ms = ms_since(t);

            let t = Instant::now();
            if network.is_none() {
                *network = Some(Network::new(
                    gray.width(),
                    gray.height(),
                    &self.neuron,
                    &self.weights,
                    self.conversion,
                )?);
            }
            let spikes = network
                .as_mut()
                .expect("built above")
                .run_frame(&diff, self.substeps)?;
            let snn_ms = ms_since(t);

            let t = Instant::now();
            let mask = postprocess(&spikes, &self.filter)?;
            let filter_ms = ms_since(t);

            Ok(FrameOutput {
                diff,
                spikes,
                mask,
                timing: StageTiming {
                    grayscale_ms: 0.0,
                    background_ms,
                    snn_ms,
                    filter_ms,
                },
            })
        })
    }
}

/// Summary of a `run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub threads: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    /// `1000 / mean_ms`.
    pub fps: f64,
    /// Mean per-frame time of each stage.
    pub stages: StageTiming,
    /// L4 spikes per neuron per frame.
    pub mean_spike_rate: f64,
    /// Fraction of mask pixels marked foreground.
    pub mean_foreground: f64,
    pub masks_written: usize,
}

/// Accumulates per-frame timing into a [`RunReport`].
#[derive(Debug, Default)]
pub struct RunStats {
    per_frame_ms: Vec<f64>,
    stages: StageTiming,
    spikes: u64,
    foreground: u64,
    pixels: u64,
    dims: (usize, usize),
}

impl RunStats {
    pub fn record(&mut self, out: &FrameOutput, total_ms: f64) {
        self.per_frame_ms.push(total_ms);
        self.stages.add(&out.timing);
        self.spikes += out.spikes.data().iter().map(|&c| u64::from(c)).sum::<u64>();
        self.foreground += out.mask.foreground_count() as u64;
        self.pixels += out.mask.data().len() as u64;
        self.dims = out.mask.dimensions();
    }

    pub fn per_frame_ms(&self) -> &[f64] {
        &self.per_frame_ms
    }

    pub fn report(&self, threads: usize, masks_written: usize) -> RunReport {
        let n = self.per_frame_ms.len();
        let mut sorted = self.per_frame_ms.clone();
        sorted.sort_by(f64::total_cmp);
        let pct = |q: f64| {
            if n == 0 {
                0.0
            } else {
                sorted[((q * n as f64).ceil() as usize).clamp(1, n) - 1]
            }
        };
        let mean_ms = if n == 0 { 0.0 } else { sorted.iter().sum::<f64>() / n as f64 };
        let per_pixel = |v: u64| if self.pixels == 0 { 0.0 } else { v as f64 / self.pixels as f64 };
        RunReport {
            frames: n,
            width: self.dims.0,
            height: self.dims.1,
            threads,
            mean_ms,
            p50_ms: pct(0.5),
            p95_ms: pct(0.95),
            max_ms: sorted.last().copied().unwrap_or(0.0),
            fps: if mean_ms > 0.0 { 1000.0 / mean_ms } else { 0.0 },
            stages: if n == 0 { StageTiming::default() } else { self.stages.scaled(1.0 / n as f64) },
            mean_spike_rate: per_pixel(self.spikes),
            mean_foreground: per_pixel(self.foreground),
            masks_written,
        }
    }
}

/// File name of the mask written for 1-based frame `index`.
pub fn mask_name(index: usize) -> String {
    format!("bin{index:06}.png")
}

fn dump_layers(net: &Network, dir: &Path, index: usize) -> Result<()> {
    for layer in [2u8, 3, 4] {
        let plane = net.spike_plane(layer).map(|&s| if s { 255u8 } else { 0 });
        write_gray_png(&plane, &dir.join(format!("l{layer}_{index:06}.png")))?;
    }
    Ok(())
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs the detector over `cfg.source`, writing masks and reports into
/// `cfg.output_dir` when set.
pub fn run(cfg: &PipelineConfig) -> Result<RunReport> {
    let src = cfg
        .source
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig(vec!["source is required".into()]))?;
    if let Source::Dataset(_) = src {
        return Err(Error::UnsupportedSource(
            "dataset roots are evaluated with the bench command".into(),
        ));
    }
    let stream = source::open(src)?;
    let mut pipeline = Pipeline::new(cfg)?;
    let out_dir: Option<PathBuf> = cfg.output_dir.clone();
    if let Some(dir) = &out_dir {
        create_dir(dir)?;
        if cfg.dump_layers {
            create_dir(&dir.join("layers"))?;
        }
    }
    let mut stats = RunStats::default();
    let mut written = 0;
    for item in stream {
        let sf = item?;
        let t = Instant::now();
        let out = pipeline.process(&sf.frame)?;
        stats.record(&out, ms_since(t));
        if let Some(dir) = &out_dir {
            if cfg.dump_masks {
                write_mask(&out.mask, dir.join(mask_name(sf.index)))?;
                written += 1;
            }
            if cfg.dump_layers {
                dump_layers(pipeline.network().expect("built on first frame"), &dir.join("layers"), sf.index)?;
            }
        }
        log::debug!("frame {} done", sf.index);
    }
    let report = stats.report(pipeline.threads(), written);
    if let Some(dir) = &out_dir {
        if cfg.report_formats.contains(&ReportFormat::Json) {
            report::write_json(&dir.join("run_report.json"), &report)?;
        }
        if cfg.report_formats.contains(&ReportFormat::Csv) {
            report::write_run_csv(&dir.join("run_report.csv"), &report)?;
        }
    }
    Ok(report)
}
