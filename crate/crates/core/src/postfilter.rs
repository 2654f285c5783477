//! Layer 5: smoothing, normalisation and binarisation of the L4 spike counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{MaskFrame, Plane};
use crate::snn::SpikeCountField;

/// Per-pixel motion values.
pub type MotionMatrix = Plane<f64>;
/// Output of [`average_filter`] or [`median_filter`].
pub type FilteredMatrix = Plane<f64>;

/// A `width × height` window of weights, applied with scale
/// `1 / (width · height)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragingKernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl AveragingKernel {
    /// Box kernel: all weights 1.
    pub fn boxed(width: usize, height: usize) -> Result<Self> {
        Self::with_weights(width, height, vec![1.0; width * height])
    }

    pub fn with_weights(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        let problems = kernel_violations(width, height, "");
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        if weights.len() != width * height {
            return Err(Error::InvalidConfig(vec![format!(
                "kernel {width}x{height} needs {} weights, got {}",
                width * height,
                weights.len()
            )]));
        }
        Ok(AveragingKernel {
            width,
            height,
            weights,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub(crate) fn kernel_violations(width: usize, height: usize, prefix: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (name, v) in [("width", width), ("height", height)] {
        if v == 0 || v % 2 == 0 {
            out.push(format!("{prefix}{name} ({v}) must be odd and at least 1"));
        }
    }
    out
}

/// How the window treats pixels outside the image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Border {
    /// Outside pixels read as 0.
    #[default]
    Zero,
    /// Outside pixels repeat the nearest edge pixel.
    Replicate,
}

impl Border {
    #[inline]
    fn sample(self, m: &MotionMatrix, x: isize, y: isize) -> f64 {
        let (w, h) = (m.width() as isize, m.height() as isize);
        match self {
            Border::Zero if x < 0 || y < 0 || x >= w || y >= h => 0.0,
            _ => {
                let cx = x.clamp(0, w - 1) as usize;
                let cy = y.clamp(0, h - 1) as usize;
                m.data()[cy * m.width() + cx]
            }
        }
    }
}

/// Which smoothing filter Layer 5 applies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    #[default]
    Average,
    Median,
}

fn check_fit(m: &MotionMatrix, kw: usize, kh: usize) -> Result<()> {
    if kw > m.width() || kh > m.height() {
        return Err(Error::KernelTooLarge {
            kernel: (kw, kh),
            image: m.dimensions(),
        });
    }
    Ok(())
}

/// Convolves `m` with `k` scaled by `1 / (u · v)`.
pub fn average_filter(m: &MotionMatrix, k: &AveragingKernel, border: Border) -> Result<FilteredMatrix> {
    check_fit(m, k.width, k.height)?;
    let (w, h) = m.dimensions();
    let (rx, ry) = ((k.width / 2) as isize, (k.height / 2) as isize);
    let scale = 1.0 / (k.width * k.height) as f64;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            // convolution: kernel flipped relative to the image offset
            for ky in 0..k.height {
                let sy = y as isize + ry - ky as isize;
                for kx in 0..k.width {
                    let sx = x as isize + rx - kx as isize;
                    acc += k.weights[ky * k.width + kx] * border.sample(m, sx, sy);
                }
            }
            *o = acc * scale;
        }
    });
    Plane::new(w, h, out)
}

/// Median over a `width × height` window.
pub fn median_filter(m: &MotionMatrix, width: usize, height: usize, border: Border) -> Result<FilteredMatrix> {
    let problems = kernel_violations(width, height, "");
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    check_fit(m, width, height)?;
    let (w, h) = m.dimensions();
    let (rx, ry) = ((width / 2) as isize, (height / 2) as isize);
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut window = Vec::with_capacity(width * height);
        for (x, o) in row.iter_mut().enumerate() {
            window.clear();
            for dy in -ry..=ry {
                for dx in -rx..=rx {
                    window.push(border.sample(m, x as isize + dx, y as isize + dy));
                }
            }
            window.sort_by(f64::total_cmp);
            *o = window[window.len() / 2];
        }
    });
    Plane::new(w, h, out)
}

/// Scales to `[0, 255]` by the maximum; an all-zero input stays zero.
pub fn normalise(f: &FilteredMatrix) -> MotionMatrix {
    let max = f.data().iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return f.map(|_| 0.0);
    }
    f.map(|&v| v / max * 255.0)
}

/// 255 where `m >= threshold`, else 0.
pub fn binarise(m: &MotionMatrix, threshold: f64) -> MaskFrame {
    MaskFrame::from_plane_unchecked(m.map(|&v| if v >= threshold { 255 } else { 0 }))
}

/// Layer-5 settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub mode: FilterMode,
    pub width: usize,
    pub height: usize,
    pub border: Border,
    /// Binarisation threshold on the normalised `[0, 255]` scale.
    pub threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            mode: FilterMode::Average,
            width: 3,
            height: 3,
            border: Border::Zero,
            threshold: 128.0,
        }
    }
}

impl FilterConfig {
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = kernel_violations(self.width, self.height, prefix);
        if self.threshold.is_nan() {
            out.push(format!("{prefix}threshold must not be NaN"));
        }
        out
    }
}

/// Counts → motion matrix → filter → normalise → mask.
pub fn postprocess(counts: &SpikeCountField, cfg: &FilterConfig) -> Result<MaskFrame> {
    let motion = counts.map(|&c| f64::from(c));
    let filtered = match cfg.mode {
        FilterMode::Average => {
            average_filter(&motion, &AveragingKernel::boxed(cfg.width, cfg.height)?, cfg.border)?
        }
        FilterMode::Median => median_filter(&motion, cfg.width, cfg.height, cfg.border)?,
    };
    Ok(binarise(&normalise(&filtered), cfg.threshold))
}
