//! A hybrid motion detector: background subtraction feeding a three-layer
//! leaky integrate-and-fire network, followed by an averaging filter that
//! turns spike counts into a binary motion mask. Includes a benchmark
//! harness for CDnet-layout datasets with the eight standard metrics and
//! average-rank (R, RC) ranking.
//!
//! ```
//! use hsmd::{Pipeline, PipelineConfig, RgbFrame};
//!
//! let mut cfg = PipelineConfig::default();
//! cfg.background.mode = hsmd::BsMode::FrameDiff;
//! cfg.threads = 1;
//! let mut p = Pipeline::new(&cfg)?;
//! let dark = RgbFrame::from_fn(16, 16, |_, _| [10, 10, 10]);
//! let lit = RgbFrame::from_fn(16, 16, |x, y| if (4..12).contains(&x) && (4..12).contains(&y) { [200; 3] } else { [10; 3] });
//! p.process(&dark)?;
//! let out = p.process(&lit)?;
//! assert!(out.mask.is_foreground(8, 8));
//! assert!(!out.mask.is_foreground(0, 0));
//! # Ok::<(), hsmd::Error>(())
//! ```

pub mod bench;
pub mod cdnet;
pub mod config;
pub mod error;
pub mod frame;
pub mod metrics;
pub mod pipeline;
pub mod postfilter;
pub mod ranking;
pub mod report;
pub mod snn;
pub mod source;
pub mod subtraction;
pub mod synthetic;

pub use bench::{bench, BenchOptions, BenchReport};
pub use cdnet::{discover_dataset, frame_confusion, run_video, CategoryResult, LabelFrame, VideoEntry, VideoResult};
pub use config::{load_config, Override, PipelineConfig, ReportFormat, Source};
pub use error::{Error, Result};
pub use frame::{to_grayscale, GrayFrame, MaskFrame, Plane, RgbFrame};
pub use metrics::{accumulate, compute_metrics, Confusion, Metric, MetricSet};
pub use pipeline::{run, FrameOutput, Pipeline, RunReport};
pub use postfilter::{average_filter, binarise, normalise, AveragingKernel, Border, FilterConfig};
pub use ranking::{rank_across_categories, rank_methods, MetricDirections, RankTable};
pub use snn::{encode_currents, lif_step, Network, NeuronParams, NeuronState, SynapseWeights};
pub use subtraction::{frame_diff, BackgroundSubtractor, BgModel, BsConfig, BsMode};
