//! Video / target-image tensors and the frame-directory interchange format.
//!
//! On disk a video is a directory of `frame_000000.png`, `frame_000001.png`,
//! ... plus a `meta.json` with `{fps, num_frames, channels, height, width}`.
//! Pixels map to [-1, 1] via x / 127.5 - 1 and back via round((x + 1) * 127.5)
//! clamped to [0, 255], which round-trips losslessly at 8-bit granularity.

use crate::error::{Error, Result};
use ndarray::{Array3, Array4, Axis};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// T x C x H x W frames in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub frames: Array4<f32>,
    pub fps: u32,
}

impl Video {
    pub fn new(frames: Array4<f32>, fps: u32) -> Result<Self> {
        let (t, _c, _h, _w) = frames.dim();
        if t < 1 {
            return Err(Error::Argument("video must have at least one frame".into()));
        }
        for v in frames.iter() {
            if !v.is_finite() || *v < -1.0 || *v > 1.0 {
                return Err(Error::Argument(format!(
                    "frame value {v} outside [-1, 1]"
                )));
            }
        }
        Ok(Video { frames, fps })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.dim().0
    }

    pub fn channels(&self) -> usize {
        self.frames.dim().1
    }

    pub fn height(&self) -> usize {
        self.frames.dim().2
    }

    pub fn width(&self) -> usize {
        self.frames.dim().3
    }

    pub fn frame(&self, t: usize) -> Array3<f32> {
        self.frames.index_axis(Axis(0), t).to_owned()
    }

    pub fn first_frame_target(&self) -> TargetImage {
        TargetImage {
            pixels: self.frame(0),
        }
    }
}

/// Single C x H x W image in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TargetImage {
    pub pixels: Array3<f32>,
}

impl TargetImage {
    pub fn new(pixels: Array3<f32>) -> Result<Self> {
        for v in pixels.iter() {
            if !v.is_finite() || *v < -1.0 || *v > 1.0 {
                return Err(Error::Argument(format!(
                    "target value {v} outside [-1, 1]"
                )));
            }
        }
        Ok(TargetImage { pixels })
    }

    pub fn channels(&self) -> usize {
        self.pixels.dim().0
    }
    pub fn height(&self) -> usize {
        self.pixels.dim().1
    }
    pub fn width(&self) -> usize {
        self.pixels.dim().2
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct VideoMeta {
    pub fps: u32,
    pub num_frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

pub fn pixel_to_unit(p: u8) -> f32 {
    p as f32 / 127.5 - 1.0
}

pub fn unit_to_pixel(v: f32) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

fn frame_name(t: usize) -> String {
    format!("frame_{t:06}.png")
}

/// Parse `frame_NNNNNN.png` into its index.
fn parse_frame_name(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".png")?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn save_video_dir(video: &Video, path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    let (t, c, h, w) = video.frames.dim();
    for ti in 0..t {
        let frame = video.frames.index_axis(Axis(0), ti);
        let file = path.join(frame_name(ti));
        match c {
            1 => {
                let img = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
                    image::Luma([unit_to_pixel(frame[[0, y as usize, x as usize]])])
                });
                img.save(&file)
                    .map_err(|e| Error::Format(format!("writing {}: {e}", file.display())))?;
            }
            3 => {
                let img = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
                    image::Rgb([
                        unit_to_pixel(frame[[0, y as usize, x as usize]]),
                        unit_to_pixel(frame[[1, y as usize, x as usize]]),
                        unit_to_pixel(frame[[2, y as usize, x as usize]]),
                    ])
                });
                img.save(&file)
                    .map_err(|e| Error::Format(format!("writing {}: {e}", file.display())))?;
            }
            other => {
                return Err(Error::Argument(format!(
                    "cannot save {other}-channel video as PNG (1 or 3 supported)"
                )))
            }
        }
    }
    let meta = VideoMeta {
        fps: video.fps,
        num_frames: t,
        channels: c,
        height: h,
        width: w,
    };
    let meta_path = path.join("meta.json");
    fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )
    .map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

pub fn load_video_dir(path: &Path) -> Result<Video> {
    if !path.is_dir() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let mut indices: Vec<usize> = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        if let Some(idx) = entry.file_name().to_str().and_then(parse_frame_name) {
            indices.push(idx);
        }
    }
    if indices.is_empty() {
        return Err(Error::NotFound(path.join("frame_000000.png")));
    }
    indices.sort_unstable();
    for (expect, &got) in indices.iter().enumerate() {
        if got != expect {
            return Err(Error::Format(format!(
                "frame numbering gap in {}: expected frame {expect:06}, found {got:06}",
                path.display()
            )));
        }
    }
    let t = indices.len();
    let mut frames: Option<Array4<f32>> = None;
    let mut dims = (0usize, 0usize, 0usize);
    for ti in 0..t {
        let file = path.join(frame_name(ti));
        let img = image::open(&file)
            .map_err(|e| Error::Format(format!("decoding {}: {e}", file.display())))?;
        let (c, pixels_fn): (usize, Box<dyn Fn(usize, usize, usize) -> u8>) = match &img {
            image::DynamicImage::ImageLuma8(g) => {
                let g = g.clone();
                (1, Box::new(move |_ch, y, x| g[(x as u32, y as u32)][0]))
            }
            image::DynamicImage::ImageRgb8(rgb) => {
                let rgb = rgb.clone();
                (3, Box::new(move |ch, y, x| rgb[(x as u32, y as u32)][ch]))
            }
            other => {
                let rgb = other.to_rgb8();
                (3, Box::new(move |ch, y, x| rgb[(x as u32, y as u32)][ch]))
            }
        };
        let (w, h) = (img.width() as usize, img.height() as usize);
        if ti == 0 {
            dims = (c, h, w);
            frames = Some(Array4::zeros((t, c, h, w)));
        } else if dims != (c, h, w) {
            return Err(Error::Format(format!(
                "mixed frame dimensions in {}: frame {ti} is {c}x{h}x{w}, expected {}x{}x{}",
                path.display(),
                dims.0,
                dims.1,
                dims.2
            )));
        }
        let fr = frames.as_mut().unwrap();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    fr[[ti, ch, y, x]] = pixel_to_unit(pixels_fn(ch, y, x));
                }
            }
        }
    }
    let meta_path = path.join("meta.json");
    let fps = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: VideoMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("bad meta.json in {}: {e}", path.display())))?;
        meta.fps
    } else {
        8
    };
    Video::new(frames.unwrap(), fps)
}

pub fn load_target_png(path: &Path) -> Result<TargetImage> {
    if !path.is_file() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let img = image::open(path)
        .map_err(|e| Error::Format(format!("decoding {}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        image::DynamicImage::ImageLuma8(g) => {
            Array3::from_shape_fn((1, h, w), |(_, y, x)| pixel_to_unit(g[(x as u32, y as u32)][0]))
        }
        other => {
            let rgb = other.to_rgb8();
            Array3::from_shape_fn((3, h, w), |(c, y, x)| {
                pixel_to_unit(rgb[(x as u32, y as u32)][c])
            })
        }
    };
    TargetImage::new(pixels)
}

pub fn save_target_png(target: &TargetImage, path: &Path) -> Result<()> {
    let (c, h, w) = target.pixels.dim();
    match c {
        1 => {
            let img = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
                image::Luma([unit_to_pixel(target.pixels[[0, y as usize, x as usize]])])
            });
            img.save(path)
                .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
        }
        3 => {
            let img = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
                image::Rgb([
                    unit_to_pixel(target.pixels[[0, y as usize, x as usize]]),
                    unit_to_pixel(target.pixels[[1, y as usize, x as usize]]),
                    unit_to_pixel(target.pixels[[2, y as usize, x as usize]]),
                ])
            });
            img.save(path)
                .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
        }
        other => Err(Error::Argument(format!(
            "cannot save {other}-channel image as PNG"
        ))),
    }
}
