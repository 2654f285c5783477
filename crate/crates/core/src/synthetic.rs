//! Generated test scenes with exact ground truth.

use std::path::{Path, PathBuf};

use crate::cdnet::{Label, LabelFrame};
use crate::error::{Error, Result};
use crate::frame::{GrayFrame, Plane, RgbFrame};
use crate::pipeline::create_dir;

/// Deterministic per-coordinate texture value in `lo..=hi`.
fn texture(x: i64, y: i64, salt: u64, lo: u8, hi: u8) -> u8 {
    let mut h = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ salt;
    h ^= h >> 29;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 32;
    lo + (h % (u64::from(hi - lo) + 1)) as u8
}

/// A textured square bouncing horizontally over a static textured
/// background. The square's texture moves with it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MovingSquare {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub size: usize,
    /// Pixels per frame.
    pub speed: usize,
}

impl Default for MovingSquare {
    fn default() -> Self {
        MovingSquare {
            width: 64,
            height: 64,
            frames: 60,
            size: 12,
            speed: 2,
        }
    }
}

impl MovingSquare {
    /// Top-left corner of the square in frame `t` (0-based).
    pub fn position(&self, t: usize) -> (usize, usize) {
        let span = self.width.saturating_sub(self.size);
        let x = if span == 0 {
            0
        } else {
            let p = (t * self.speed) % (2 * span);
            if p <= span { p } else { 2 * span - p }
        };
        (x, self.height.saturating_sub(self.size) / 2)
    }

    fn inside(&self, t: usize, x: usize, y: usize) -> Option<(usize, usize)> {
        let (sx, sy) = self.position(t);
        (x >= sx && x < sx + self.size && y >= sy && y < sy + self.size).then(|| (x - sx, y - sy))
    }

    pub fn gray(&self, t: usize) -> GrayFrame {
        Plane::from_fn(self.width, self.height, |x, y| match self.inside(t, x, y) {
            Some((u, v)) => texture(u as i64, v as i64, 7, 150, 250),
            None => texture(x as i64, y as i64, 1, 20, 110),
        })
    }

    pub fn frame(&self, t: usize) -> RgbFrame {
        RgbFrame::from_gray(&self.gray(t))
    }

    pub fn ground_truth(&self, t: usize) -> LabelFrame {
        LabelFrame::from_labels(self.width, self.height, |x, y| {
            if self.inside(t, x, y).is_some() {
                Label::Moving
            } else {
                Label::Static
            }
        })
    }

    /// Writes the scene as one CDnet video:
    /// `root/<category>/<video>/{input, groundtruth, temporalROI.txt}`.
    /// Inputs are JPEG like the published datasets; the temporal ROI is
    /// `first..=frames`.
    pub fn write_cdnet(&self, root: &Path, category: &str, video: &str, first: usize) -> Result<PathBuf> {
        let dir = root.join(category).join(video);
        let input = dir.join("input");
        let gt = dir.join("groundtruth");
        create_dir(&input)?;
        create_dir(&gt)?;
        for t in 0..self.frames {
            let n = t + 1;
            let p = input.join(format!("in{n:06}.jpg"));
            save(&p, self.gray(t))?;
            let p = gt.join(format!("gt{n:06}.png"));
            save(&p, self.ground_truth(t).plane().clone())?;
        }
        let roi = dir.join("temporalROI.txt");
        std::fs::write(&roi, format!("{first} {}\n", self.frames)).map_err(|e| Error::io(&roi, e))?;
        Ok(dir)
    }
}

fn save(path: &Path, plane: GrayFrame) -> Result<()> {
    let (w, h) = plane.dimensions();
    image::GrayImage::from_raw(w as u32, h as u32, plane.into_data())
        .expect("buffer matches dimensions")
        .save(path)
        .map_err(|e| Error::Encode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}
