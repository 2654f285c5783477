//! Frame sources: image-sequence directories and animated GIFs.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use image::AnimationDecoder;

use crate::config::Source;
use crate::error::{Error, Result};
use crate::frame::{load_frame, RgbFrame};

/// A decoded frame with its 1-based position in the stream.
#[derive(Clone, Debug)]
pub struct SourceFrame {
    pub index: usize,
    pub frame: RgbFrame,
}

pub type FrameStream = Box<dyn Iterator<Item = Result<SourceFrame>> + Send>;

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp"];

/// Trailing digits of the file stem (`in000123.jpg` → 123).
pub fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Image files in `dir` whose names start with `prefix`, ordered by frame
/// number and then by name.
pub fn list_images(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let read = std::fs::read_dir(dir).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(dir.to_path_buf())
        } else {
            Error::io(dir, e)
        }
    })?;
    let mut files = Vec::new();
    for entry in read {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        let named = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with(prefix));
        if is_image && named && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| {
        frame_number(a)
            .cmp(&frame_number(b))
            .then_with(|| a.file_name().cmp(&b.file_name()))
    });
    Ok(files)
}

/// Opens a frame stream. Dataset roots are handled by the benchmark, not
/// here.
pub fn open(source: &Source) -> Result<FrameStream> {
    match source {
        Source::Sequence(dir) => {
            let files = list_images(dir, "")?;
            if files.is_empty() {
                return Err(Error::UnsupportedSource(format!(
                    "no image files in {}",
                    dir.display()
                )));
            }
            Ok(Box::new(files.into_iter().enumerate().map(|(i, p)| {
                load_frame(&p).map(|frame| SourceFrame { index: i + 1, frame })
            })))
        }
        Source::Video(path) => open_video(path),
        Source::Device(n) => Err(Error::UnsupportedSource(format!(
            "live capture from device {n} is not available in this build; \
             record to an image sequence and pass the directory instead"
        ))),
        Source::Dataset(root) => Err(Error::UnsupportedSource(format!(
            "{} is a dataset root; use the bench command",
            root.display()
        ))),
    }
}

fn open_video(path: &Path) -> Result<FrameStream> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("gif") => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let decode_err = |e: image::ImageError| Error::Decode {
                path: path.to_path_buf(),
                message: e.to_string(),
            };
            let decoder = image::codecs::gif::GifDecoder::new(BufReader::new(file)).map_err(decode_err)?;
            let owned = path.to_path_buf();
            let frames = decoder.into_frames().enumerate().map(move |(i, f)| {
                let f = f.map_err(|e| Error::Decode {
                    path: owned.clone(),
                    message: e.to_string(),
                })?;
                let rgba = f.into_buffer();
                let (w, h) = rgba.dimensions();
                let rgb = image::DynamicImage::ImageRgba8(rgba).to_rgb8().into_raw();
                Ok(SourceFrame {
                    index: i + 1,
                    frame: RgbFrame::new(w as usize, h as usize, rgb)?,
                })
            });
            // the GIF decoder is not Send; decode eagerly
            let frames: Vec<_> = frames.collect();
            Ok(Box::new(frames.into_iter()))
        }
        _ => Err(Error::UnsupportedSource(format!(
            "{}: only animated GIF video files are decoded directly; \
             extract other containers to an image sequence",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_numbers() {
        assert_eq!(frame_number(Path::new("in000123.jpg")), Some(123));
        assert_eq!(frame_number(Path::new("gt1.png")), Some(1));
        assert_eq!(frame_number(Path::new("frame.png")), None);
    }

    #[test]
    fn listing_sorts_numerically() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["in10.png", "in9.png", "in100.png", "notes.txt", "gt1.png"] {
            std::fs::write(dir.path().join(name), b"x").unwrap();
        }
        let names: Vec<_> = list_images(dir.path(), "in")
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["in9.png", "in10.png", "in100.png"]);
    }

    #[test]
    fn device_and_unknown_video_are_unsupported() {
        assert!(matches!(open(&Source::Device(0)), Err(Error::UnsupportedSource(_))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("clip.mp4");
        std::fs::write(&p, b"").unwrap();
        assert!(matches!(open(&Source::Video(p)), Err(Error::UnsupportedSource(_))));
        assert!(matches!(
            open(&Source::Video(dir.path().join("missing.gif"))),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn gif_frames_are_decoded() {
        use image::codecs::gif::GifEncoder;
        use image::{Delay, Frame, RgbaImage};
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("clip.gif");
        {
            let file = File::create(&p).unwrap();
            let mut enc = GifEncoder::new(file);
            for t in 0..3u8 {
                let img = RgbaImage::from_fn(6, 4, |x, _| image::Rgba([x as u8 * 40 + t, 0, 0, 255]));
                enc.encode_frame(Frame::from_parts(img, 0, 0, Delay::from_numer_denom_ms(40, 1)))
                    .unwrap();
            }
        }
        let frames: Vec<_> = open(&Source::Video(p)).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(frames.len(), 3);
        assert_eq!(frames[2].index, 3);
        assert_eq!(frames[0].frame.dimensions(), (6, 4));
    }
}
