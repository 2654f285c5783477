//! Layer 1: background subtraction.
//!
//! Two subtractors produce a [`DiffFrame`] from the grayscale stream:
//!
//! * plain frame differencing against the previous frame with a noise
//!   threshold, and
//! * a sample-consensus model in the style of GSOC/ViBe. Each pixel keeps a
//!   bank of `N` past observations (intensity plus a 32-bit local binary
//!   pattern). A pixel is background when enough samples agree with the
//!   current observation. Background pixels occasionally refresh their own
//!   bank and a neighbour's.
//!
//! The sample-consensus model approximates the published GSOC behaviour; it is
//! not a port of the OpenCV implementation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{GrayFrame, Plane, MIN_PAR_LEN};

/// Per-pixel foreground evidence in `[0, 255]`; 0 means background.
pub type DiffFrame = Plane<u8>;

/// Absolute difference against `prev`, zeroed where it falls below
/// `threshold`.
pub fn frame_diff(curr: &GrayFrame, prev: &GrayFrame, threshold: u8) -> Result<DiffFrame> {
    curr.ensure_same_size(prev)?;
    let data = curr
        .data()
        .par_iter()
        .zip(prev.data().par_iter())
        .with_min_len(MIN_PAR_LEN)
        .map(|(&c, &p)| {
            let d = c.abs_diff(p);
            if d >= threshold {
                d
            } else {
                0
            }
        })
        .collect();
    Plane::new(curr.width(), curr.height(), data)
}

/// Neighbour offsets of the ring descriptor: the 5×5 window around the
/// centre in raster order, centre excluded. Bit `i` of a pattern corresponds
/// to `RING[i]`; bits 24..32 are always clear.
pub const RING: [(i32, i32); 24] = {
    let mut out = [(0, 0); 24];
    let mut i = 0;
    let mut dy = -2;
    while dy <= 2 {
        let mut dx = -2;
        while dx <= 2 {
            if dx != 0 || dy != 0 {
                out[i] = (dx, dy);
                i += 1;
            }
            dx += 1;
        }
        dy += 1;
    }
    out
};

#[inline]
fn ring_pattern(frame: &GrayFrame, x: usize, y: usize, margin: u8) -> u32 {
    let (w, h) = (frame.width() as i32, frame.height() as i32);
    let data = frame.data();
    let centre = i32::from(data[y * frame.width() + x]) + i32::from(margin);
    let mut bits = 0u32;
    for (i, &(dx, dy)) in RING.iter().enumerate() {
        let nx = x as i32 + dx;
        let ny = y as i32 + dy;
        if nx < 0 || ny < 0 || nx >= w || ny >= h {
            continue;
        }
        if i32::from(data[(ny * w + nx) as usize]) > centre {
            bits |= 1 << i;
        }
    }
    bits
}

/// Local binary pattern at `(x, y)`: bit `i` is set when the neighbour at
/// `RING[i]` is brighter than the centre by more than `margin`. Neighbours
/// outside the frame contribute a 0 bit.
pub fn lsbp_descriptor(frame: &GrayFrame, x: usize, y: usize, margin: u8) -> Result<u32> {
    if x >= frame.width() || y >= frame.height() {
        return Err(Error::OutOfBounds {
            x,
            y,
            width: frame.width(),
            height: frame.height(),
        });
    }
    Ok(ring_pattern(frame, x, y, margin))
}

/// Descriptors for every pixel.
pub fn lsbp_descriptors(frame: &GrayFrame, margin: u8) -> Plane<u32> {
    let w = frame.width();
    let data = (0..frame.len())
        .into_par_iter()
        .with_min_len(MIN_PAR_LEN)
        .map(|i| ring_pattern(frame, i % w, i / w, margin))
        .collect();
    Plane::new(w, frame.height(), data).expect("descriptor plane matches frame")
}

/// Hyper-parameters of the sample-consensus model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusParams {
    /// Samples kept per pixel (`N`).
    pub samples: usize,
    /// Largest intensity difference that still counts as a match.
    pub match_threshold: u8,
    /// Largest descriptor Hamming distance that still counts as a match.
    pub hamming_threshold: u32,
    /// Matches needed to call a pixel background.
    pub min_matches: usize,
    /// Chance a background pixel overwrites one of its own samples.
    pub p_replace: f64,
    /// Chance a background pixel overwrites a sample of a 4-neighbour.
    pub p_neighbor: f64,
    /// Half-width of the uniform intensity jitter applied at initialisation.
    pub jitter: u8,
    /// Brightness margin of the ring descriptor.
    pub lsbp_margin: u8,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        ConsensusParams {
            samples: 20,
            match_threshold: 25,
            hamming_threshold: 4,
            min_matches: 2,
            p_replace: 0.01,
            p_neighbor: 0.003,
            jitter: 8,
            lsbp_margin: 4,
        }
    }
}

impl ConsensusParams {
    /// Returns one message per violated invariant, prefixed with `prefix`.
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.samples == 0 {
            out.push(format!("{prefix}samples must be at least 1"));
        }
        if self.min_matches > self.samples {
            out.push(format!(
                "{prefix}min_matches ({}) must not exceed {prefix}samples ({})",
                self.min_matches, self.samples
            ));
        }
        for (name, p) in [("p_replace", self.p_replace), ("p_neighbor", self.p_neighbor)] {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("{prefix}{name} ({p}) must lie in [0, 1]"));
            }
        }
        if self.hamming_threshold > 32 {
            out.push(format!(
                "{prefix}hamming_threshold ({}) exceeds 32 bits",
                self.hamming_threshold
            ));
        }
        out
    }
}

/// Per-pixel sample banks plus the generator that drives their updates.
#[derive(Clone, Debug, PartialEq)]
pub struct BgModel {
    width: usize,
    height: usize,
    params: ConsensusParams,
    // pixel-major: samples of pixel i live at [i * N, (i + 1) * N)
    intensities: Vec<u8>,
    descriptors: Vec<u32>,
    rng: ChaCha8Rng,
}

impl BgModel {
    /// Seeds every bank from `first`. Sample 0 is the observed intensity;
    /// the remaining samples are jittered uniformly by up to
    /// `params.jitter`.
    pub fn init(first: &GrayFrame, params: &ConsensusParams, seed: u64) -> Result<Self> {
        let problems = params.violations("");
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        let n = params.samples;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let desc = lsbp_descriptors(first, params.lsbp_margin);
        let mut intensities = Vec::with_capacity(first.len() * n);
        let mut descriptors = Vec::with_capacity(first.len() * n);
        let jitter = i32::from(params.jitter);
        for (&v, &d) in first.data().iter().zip(desc.data()) {
            intensities.push(v);
            descriptors.push(d);
            for _ in 1..n {
                let offset = if jitter > 0 {
                    rng.random_range(-jitter..=jitter)
                } else {
                    0
                };
                intensities.push((i32::from(v) + offset).clamp(0, 255) as u8);
                descriptors.push(d);
            }
        }
        Ok(BgModel {
            width: first.width(),
            height: first.height(),
            params: params.clone(),
            intensities,
            descriptors,
            rng,
        })
    }

    pub fn params(&self) -> &ConsensusParams {
        &self.params
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// The `(intensity, descriptor)` bank of pixel `(x, y)`.
    pub fn samples(&self, x: usize, y: usize) -> impl Iterator<Item = (u8, u32)> + '_ {
        let n = self.params.samples;
        let start = (y * self.width + x) * n;
        self.intensities[start..start + n]
            .iter()
            .copied()
            .zip(self.descriptors[start..start + n].iter().copied())
    }

    fn is_background(&self, pixel: usize, value: u8, desc: u32) -> bool {
        let p = &self.params;
        if p.min_matches == 0 {
            return true;
        }
        let start = pixel * p.samples;
        let bank = start..start + p.samples;
        let mut matches = 0;
        for (&s, &sd) in self.intensities[bank.clone()]
            .iter()
            .zip(&self.descriptors[bank])
        {
            if s.abs_diff(value) <= p.match_threshold && (sd ^ desc).count_ones() <= p.hamming_threshold
            {
                matches += 1;
                if matches >= p.min_matches {
                    return true;
                }
            }
        }
        false
    }

    /// Classifies `frame` and updates the model.
    ///
    /// Decisions for all pixels are taken against the model as it was before
    /// this frame; the randomised updates run afterwards in pixel order from
    /// the model's own generator, so the output is independent of the worker
    /// count.
    pub fn apply(&mut self, frame: &GrayFrame) -> Result<DiffFrame> {
        if frame.dimensions() != self.dimensions() {
            return Err(Error::DimensionMismatch {
                expected: self.dimensions(),
                actual: frame.dimensions(),
            });
        }
        let desc = lsbp_descriptors(frame, self.params.lsbp_margin);
        let values = frame.data();
        let descs = desc.data();
        let background: Vec<bool> = (0..frame.len())
            .into_par_iter()
            .with_min_len(MIN_PAR_LEN)
            .map(|i| self.is_background(i, values[i], descs[i]))
            .collect();

        let n = self.params.samples;
        let (w, h) = (self.width, self.height);
        for (i, _) in background.iter().enumerate().filter(|(_, &bg)| bg) {
            if self.rng.random_bool(self.params.p_replace) {
                let k = self.rng.random_range(0..n);
                self.intensities[i * n + k] = values[i];
                self.descriptors[i * n + k] = descs[i];
            }
            if self.rng.random_bool(self.params.p_neighbor) {
                let (x, y) = (i % w, i / w);
                let neighbour = match self.rng.random_range(0..4u8) {
                    0 if x > 0 => Some(i - 1),
                    1 if x + 1 < w => Some(i + 1),
                    2 if y > 0 => Some(i - w),
                    3 if y + 1 < h => Some(i + w),
                    _ => None,
                };
                if let Some(j) = neighbour {
                    let k = self.rng.random_range(0..n);
                    self.intensities[j * n + k] = values[i];
                    self.descriptors[j * n + k] = descs[i];
                }
            }
        }

        let data = background
            .into_iter()
            .map(|bg| if bg { 0 } else { 255 })
            .collect();
        Plane::new(w, h, data)
    }
}

/// Which subtractor feeds the spiking layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BsMode {
    FrameDiff,
    #[default]
    SampleConsensus,
}

impl std::str::FromStr for BsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "frame-diff" => Ok(BsMode::FrameDiff),
            "sample-consensus" => Ok(BsMode::SampleConsensus),
            other => Err(format!(
                "unknown background mode `{other}` (expected frame-diff or sample-consensus)"
            )),
        }
    }
}

/// Background-subtraction settings.
#[derive(Clone, Debug, PartialEq)]
pub struct BsConfig {
    pub mode: BsMode,
    /// Frame-diff noise threshold.
    pub diff_threshold: u8,
    pub consensus: ConsensusParams,
}

impl Default for BsConfig {
    fn default() -> Self {
        BsConfig {
            mode: BsMode::default(),
            diff_threshold: 15,
            consensus: ConsensusParams::default(),
        }
    }
}

/// A stateful subtractor in either mode. The first frame primes the state
/// and yields an all-zero difference.
#[derive(Clone, Debug)]
pub enum BackgroundSubtractor {
    FrameDiff {
        threshold: u8,
        previous: Option<GrayFrame>,
    },
    SampleConsensus {
        params: ConsensusParams,
        seed: u64,
        model: Option<Box<BgModel>>,
    },
}

impl BackgroundSubtractor {
    pub fn new(cfg: &BsConfig, seed: u64) -> Self {
        match cfg.mode {
            BsMode::FrameDiff => BackgroundSubtractor::FrameDiff {
                threshold: cfg.diff_threshold,
                previous: None,
            },
            BsMode::SampleConsensus => BackgroundSubtractor::SampleConsensus {
                params: cfg.consensus.clone(),
                seed,
                model: None,
            },
        }
    }

    pub fn apply(&mut self, frame: &GrayFrame) -> Result<DiffFrame> {
        match self {
            BackgroundSubtractor::FrameDiff {
                threshold,
                previous,
            } => {
                let diff = match previous.as_ref() {
                    Some(prev) => frame_diff(frame, prev, *threshold)?,
                    None => Plane::filled(frame.width(), frame.height(), 0),
                };
                *previous = Some(frame.clone());
                Ok(diff)
            }
            BackgroundSubtractor::SampleConsensus {
                params,
                seed,
                model,
            } => {
                if model.is_none() {
                    *model = Some(Box::new(BgModel::init(frame, params, *seed)?));
                }
                model.as_mut().expect("initialised above").apply(frame)
            }
        }
    }
}
