//! Frame containers and image I/O shared by every stage.
//!
//! Every per-pixel quantity in the detector lives in a [`Plane`]: a
//! row-major `width × height` buffer. The aliases below name the planes by
//! what they hold. [`RgbFrame`] and [`MaskFrame`] carry extra invariants and
//! are separate types.

use std::path::Path;

use image::{GrayImage, ImageReader};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Minimum elements handed to a single rayon task in the per-pixel kernels.
pub(crate) const MIN_PAR_LEN: usize = 4096;

/// A row-major plane of per-pixel values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// 8-bit intensities.
pub type GrayFrame = Plane<u8>;

impl<T> Plane<T> {
    /// Wraps `data`, checking that it holds exactly `width * height` values.
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "zero-sized plane {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} plane needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "zero-sized plane");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn index_of(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn get(&self, x: usize, y: usize) -> Option<&T> {
        (x < self.width && y < self.height).then(|| &self.data[y * self.width + x])
    }

    pub fn set(&mut self, x: usize, y: usize, value: T) {
        assert!(x < self.width && y < self.height, "({x}, {y}) out of bounds");
        let i = y * self.width + x;
        self.data[i] = value;
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Errors unless `other` has the same dimensions.
    pub fn ensure_same_size<U>(&self, other: &Plane<U>) -> Result<()> {
        if self.dimensions() != other.dimensions() {
            return Err(Error::DimensionMismatch {
                expected: self.dimensions(),
                actual: other.dimensions(),
            });
        }
        Ok(())
    }
}

impl<T: Clone> Plane<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "zero-sized plane");
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T: Sync> Plane<T> {
    /// Pixel-parallel map. Each output depends only on its own input, so the
    /// result does not depend on the worker count.
    pub fn par_map<U: Send>(&self, f: impl Fn(&T) -> U + Sync + Send) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self
                .data
                .par_iter()
                .with_min_len(MIN_PAR_LEN)
                .map(f)
                .collect(),
        }
    }
}

/// An 8-bit-per-channel RGB frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "zero-sized frame {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} RGB frame needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(RgbFrame {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "zero-sized frame");
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        RgbFrame {
            width,
            height,
            data,
        }
    }

    /// Replicates each intensity into all three channels.
    pub fn from_gray(gray: &GrayFrame) -> Self {
        let data = gray.data().iter().flat_map(|&v| [v, v, v]).collect();
        RgbFrame {
            width: gray.width(),
            height: gray.height(),
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Binary foreground mask holding only 0 and 255.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskFrame(Plane<u8>);

impl MaskFrame {
    pub const FOREGROUND: u8 = 255;
    pub const BACKGROUND: u8 = 0;

    pub fn new(plane: Plane<u8>) -> Result<Self> {
        if let Some(pos) = plane.data().iter().position(|&v| v != 0 && v != 255) {
            return Err(Error::InvalidFrame(format!(
                "mask value {} at index {pos} is not 0 or 255",
                plane.data()[pos]
            )));
        }
        Ok(MaskFrame(plane))
    }

    pub fn from_bools(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        MaskFrame(Plane::from_fn(width, height, |x, y| {
            if f(x, y) {
                Self::FOREGROUND
            } else {
                Self::BACKGROUND
            }
        }))
    }

    pub(crate) fn from_plane_unchecked(plane: Plane<u8>) -> Self {
        debug_assert!(plane.data().iter().all(|&v| v == 0 || v == 255));
        MaskFrame(plane)
    }

    pub fn plane(&self) -> &Plane<u8> {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn dimensions(&self) -> (usize, usize) {
        self.0.dimensions()
    }

    pub fn data(&self) -> &[u8] {
        self.0.data()
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.0.data()[self.0.index_of(x, y)] == Self::FOREGROUND
    }

    pub fn foreground_count(&self) -> usize {
        self.0.data().iter().filter(|&&v| v == Self::FOREGROUND).count()
    }
}

/// BT.601 luma with round-half-up, computed in integer arithmetic so the
/// rounding is exact: `(299 R + 587 G + 114 B + 500) / 1000`.
#[inline]
pub fn luma(rgb: [u8; 3]) -> u8 {
    let [r, g, b] = rgb.map(u32::from);
    let v = (299 * r + 587 * g + 114 * b + 500) / 1000;
    v.min(255) as u8
}

/// Converts an RGB frame to 8-bit grayscale.
pub fn to_grayscale(frame: &RgbFrame) -> GrayFrame {
    let data: Vec<u8> = frame
        .data()
        .par_chunks_exact(3)
        .with_min_len(MIN_PAR_LEN)
        .map(|px| luma([px[0], px[1], px[2]]))
        .collect();
    Plane {
        width: frame.width(),
        height: frame.height(),
        data,
    }
}

/// Decodes a JPEG/PNG (or any format the `image` crate was built with).
/// Grayscale sources are promoted to RGB by channel replication.
pub fn load_frame(path: impl AsRef<Path>) -> Result<RgbFrame> {
    let rgb = decode(path.as_ref())?.to_rgb8();
    let (w, h) = rgb.dimensions();
    RgbFrame::new(w as usize, h as usize, rgb.into_raw())
}

/// Decodes an image and returns its luma channel without colour weighting
/// (used for ground-truth and ROI images, which are already single-channel).
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayFrame> {
    let gray = decode(path.as_ref())?.to_luma8();
    let (w, h) = gray.dimensions();
    Plane::new(w as usize, h as usize, gray.into_raw())
}

fn decode(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes an 8-bit single-channel PNG.
pub fn write_mask(mask: &MaskFrame, path: impl AsRef<Path>) -> Result<()> {
    write_gray_png(mask.plane(), path.as_ref())
}

pub(crate) fn write_gray_png(plane: &Plane<u8>, path: &Path) -> Result<()> {
    image::save_buffer_with_format(
        path,
        plane.data(),
        plane.width() as u32,
        plane.height() as u32,
        image::ExtendedColorType::L8,
        image::ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Encode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

/// Resamples a grayscale frame by `factor` with a triangle filter. A factor
/// of 1.0 returns the input unchanged.
pub fn rescale(frame: &GrayFrame, factor: f64) -> GrayFrame {
    if factor == 1.0 {
        return frame.clone();
    }
    let w = ((frame.width() as f64 * factor).round() as u32).max(1);
    let h = ((frame.height() as f64 * factor).round() as u32).max(1);
    let img = GrayImage::from_raw(
        frame.width() as u32,
        frame.height() as u32,
        frame.data().to_vec(),
    )
    .expect("plane length matches dimensions");
    let out = image::imageops::resize(&img, w, h, image::imageops::FilterType::Triangle);
    Plane::new(w as usize, h as usize, out.into_raw()).expect("resize output is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn luma_reference_points() {
        assert_eq!(luma([0, 0, 0]), 0);
        assert_eq!(luma([255, 255, 255]), 255);
        // round(0.299 * 255) = round(76.245)
        assert_eq!(luma([255, 0, 0]), 76);
        assert_eq!(luma([0, 255, 0]), 150);
        assert_eq!(luma([0, 0, 255]), 29);
    }

    #[test]
    fn grayscale_preserves_dimensions() {
        let f = RgbFrame::from_fn(5, 3, |x, y| [x as u8, y as u8, 7]);
        let g = to_grayscale(&f);
        assert_eq!(g.dimensions(), (5, 3));
        assert_eq!(g.get(4, 2), Some(&luma([4, 2, 7])));
    }

    #[test]
    fn frame_constructors_reject_bad_lengths() {
        assert!(RgbFrame::new(2, 2, vec![0; 11]).is_err());
        assert!(RgbFrame::new(0, 2, vec![]).is_err());
        assert!(Plane::new(3, 3, vec![0u8; 8]).is_err());
        assert!(MaskFrame::new(Plane::new(1, 2, vec![0u8, 7]).unwrap()).is_err());
    }

    #[test]
    fn missing_file_is_reported_with_path() {
        let err = load_frame("/definitely/not/here.png").unwrap_err();
        assert!(matches!(err, Error::NotFound(_)));
        assert!(err.to_string().contains("file not found"));
        assert!(err.to_string().contains("/definitely/not/here.png"));
    }

    #[test]
    fn truncated_file_is_a_decode_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.png");
        let mask = MaskFrame::from_bools(8, 8, |x, y| (x + y) % 2 == 0);
        write_mask(&mask, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        let err = load_frame(&path).unwrap_err();
        assert!(matches!(err, Error::Decode { .. }), "{err}");
        assert!(err.to_string().contains("decode failure"));
    }

    #[test]
    fn jpeg_dimensions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in000001.jpg");
        let img = image::RgbImage::from_fn(720, 480, |x, y| image::Rgb([x as u8, y as u8, 9]));
        img.save(&path).unwrap();
        let f = load_frame(&path).unwrap();
        assert_eq!(f.dimensions(), (720, 480));
    }

    #[test]
    fn gray_png_is_promoted_to_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let mask = MaskFrame::from_bools(3, 2, |x, _| x == 1);
        write_mask(&mask, &path).unwrap();
        let f = load_frame(&path).unwrap();
        assert_eq!(f.pixel(1, 0), [255, 255, 255]);
        assert_eq!(f.pixel(0, 1), [0, 0, 0]);
    }

    #[test]
    fn mask_png_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        for mask in [
            MaskFrame::from_bools(4, 4, |_, _| false),
            MaskFrame::from_bools(2, 2, |x, y| (x + y) % 2 == 1),
        ] {
            let path = dir.path().join("m.png");
            write_mask(&mask, &path).unwrap();
            let back = load_gray(&path).unwrap();
            assert_eq!(&back, mask.plane());
        }
    }

    #[test]
    fn unwritable_destination_is_an_io_error() {
        let mask = MaskFrame::from_bools(2, 2, |_, _| true);
        let err = write_mask(&mask, "/nonexistent-dir/x/m.png").unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }

    #[test]
    fn rescale_identity_and_half() {
        let g = Plane::from_fn(8, 6, |x, y| (x * 10 + y) as u8);
        assert_eq!(rescale(&g, 1.0), g);
        assert_eq!(rescale(&g, 0.5).dimensions(), (4, 3));
    }

    proptest! {
        #[test]
        fn luma_is_monotone_per_channel(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255, ch in 0usize..3) {
            let mut up = [r, g, b];
            if up[ch] < 255 {
                up[ch] += 1;
                prop_assert!(luma(up) >= luma([r, g, b]));
            }
        }

        #[test]
        fn luma_within_channel_range(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            let v = luma([r, g, b]) as i32;
            let lo = r.min(g).min(b) as i32;
            let hi = r.max(g).max(b) as i32;
            prop_assert!(v >= lo - 1 && v <= hi + 1);
        }

        #[test]
        fn mask_write_decode_identity(bits in proptest::collection::vec(any::<bool>(), 1..64), w in 1usize..8) {
            let h = bits.len().div_ceil(w);
            let mask = MaskFrame::from_bools(w, h, |x, y| bits.get(y * w + x).copied().unwrap_or(false));
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.png");
            write_mask(&mask, &path).unwrap();
            prop_assert_eq!(&load_gray(&path).unwrap(), mask.plane());
        }
    }
}
