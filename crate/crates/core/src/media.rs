//! Video codec boundary. Stages see decoded videos as frame arrays; the
//! container format lives behind [`VideoCodec`] so real decoders can be
//! injected. [`AdlvCodec`] is the bundled lossless container (run-length
//! encoded RGB frames) used for synthetic corpora and stitched outputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{imageops, ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::model::Rect;

pub type Frame = RgbImage;

#[derive(Debug, Clone, PartialEq)]
pub struct VideoFrames {
    pub fps: f64,
    pub frames: Vec<Frame>,
}

impl VideoFrames {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dimensions(&self) -> Option<(u32, u32)> {
        self.frames.first().map(|f| f.dimensions())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoInfo {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub num_frames: usize,
}

pub trait VideoCodec: Send + Sync {
    fn probe(&self, path: &Path) -> Result<VideoInfo>;
    fn decode(&self, path: &Path) -> Result<VideoFrames>;
    fn encode(&self, path: &Path, video: &VideoFrames) -> Result<()>;
}

const MAGIC: &[u8; 4] = b"ADLV";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default)]
pub struct AdlvCodec;

impl AdlvCodec {
    fn read_header(r: &mut impl Read, path: &Path) -> Result<VideoInfo> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != MAGIC {
            return Err(Error::Media(format!("{}: not an ADLV file", path.display())));
        }
        let version = read_u32(r, path)?;
        if version != VERSION {
            return Err(Error::Media(format!(
                "{}: unsupported ADLV version {version}",
                path.display()
            )));
        }
        let width = read_u32(r, path)?;
        let height = read_u32(r, path)?;
        let mut fps = [0u8; 8];
        r.read_exact(&mut fps).map_err(|e| Error::io(path, e))?;
        let num_frames = read_u32(r, path)? as usize;
        Ok(VideoInfo {
            width,
            height,
            fps: f64::from_le_bytes(fps),
            num_frames,
        })
    }
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(b))
}

impl VideoCodec for AdlvCodec {
    fn probe(&self, path: &Path) -> Result<VideoInfo> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_header(&mut BufReader::new(f), path)
    }

    fn decode(&self, path: &Path) -> Result<VideoFrames> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(f);
        let info = Self::read_header(&mut r, path)?;
        let pixels = info.width as usize * info.height as usize;
        let mut frames = Vec::with_capacity(info.num_frames);
        for t in 0..info.num_frames {
            let len = read_u32(&mut r, path)? as usize;
            let mut runs = vec![0u8; len];
            r.read_exact(&mut runs).map_err(|e| Error::io(path, e))?;
            let data = rle_decode(&runs, pixels)
                .ok_or_else(|| Error::Media(format!("{}: frame {t} is corrupt", path.display())))?;
            frames.push(
                RgbImage::from_raw(info.width, info.height, data).expect("length checked"),
            );
        }
        Ok(VideoFrames {
            fps: info.fps,
            frames,
        })
    }

    fn encode(&self, path: &Path, video: &VideoFrames) -> Result<()> {
        let (w, h) = video
            .dimensions()
            .ok_or_else(|| Error::Media("cannot encode a video with no frames".into()))?;
        if video.frames.iter().any(|f| f.dimensions() != (w, h)) {
            return Err(Error::Media("frames differ in size".into()));
        }
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut wtr = BufWriter::new(f);
        let mut put = |b: &[u8]| wtr.write_all(b).map_err(|e| Error::io(path, e));
        put(MAGIC)?;
        put(&VERSION.to_le_bytes())?;
        put(&w.to_le_bytes())?;
        put(&h.to_le_bytes())?;
        put(&video.fps.to_le_bytes())?;
        put(&(video.frames.len() as u32).to_le_bytes())?;
        for frame in &video.frames {
            let runs = rle_encode(frame.as_raw());
            put(&(runs.len() as u32).to_le_bytes())?;
            put(&runs)?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs of `(count, r, g, b)` with count in 1..=255.
fn rle_encode(rgb: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut px = rgb.chunks_exact(3).peekable();
    while let Some(p) = px.next() {
        let mut count = 1u8;
        while count < 255 && px.peek() == Some(&p) {
            px.next();
            count += 1;
        }
        out.extend_from_slice(&[count, p[0], p[1], p[2]]);
    }
    out
}

fn rle_decode(runs: &[u8], pixels: usize) -> Option<Vec<u8>> {
    if !runs.len().is_multiple_of(4) {
        return None;
    }
    let mut out = Vec::with_capacity(pixels * 3);
    for run in runs.chunks_exact(4) {
        for _ in 0..run[0] {
            out.extend_from_slice(&run[1..4]);
        }
    }
    (out.len() == pixels * 3).then_some(out)
}

pub fn crop(frame: &Frame, rect: &Rect) -> Frame {
    let (w, h) = frame.dimensions();
    let x1 = rect.x1.clamp(0, w as i64) as u32;
    let y1 = rect.y1.clamp(0, h as i64) as u32;
    let x2 = rect.x2.clamp(0, w as i64) as u32;
    let y2 = rect.y2.clamp(0, h as i64) as u32;
    imageops::crop_imm(frame, x1, y1, (x2 - x1).max(1), (y2 - y1).max(1)).to_image()
}

/// Aspect-preserving resize onto a black `width × height` canvas.
pub fn letterbox(frame: &Frame, width: u32, height: u32) -> Frame {
    let (w, h) = frame.dimensions();
    let scale = (width as f64 / w as f64).min(height as f64 / h as f64);
    let nw = ((w as f64 * scale).round() as u32).clamp(1, width);
    let nh = ((h as f64 * scale).round() as u32).clamp(1, height);
    let resized = imageops::resize(frame, nw, nh, imageops::FilterType::Triangle);
    let mut canvas = RgbImage::from_pixel(width, height, Rgb([0, 0, 0]));
    imageops::replace(
        &mut canvas,
        &resized,
        ((width - nw) / 2) as i64,
        ((height - nh) / 2) as i64,
    );
    canvas
}

pub fn encode_png(frame: &Frame) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    frame
        .write_to(&mut buf, ImageFormat::Png)
        .expect("in-memory PNG encoding");
    buf.into_inner()
}

pub fn decode_png(bytes: &[u8]) -> Result<Frame> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map(|i| i.to_rgb8())
        .map_err(|e| Error::Media(format!("png decode: {e}")))
}

/// Width and height from a PNG header without decoding pixels.
pub fn png_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    if bytes.len() < 24 || &bytes[1..4] != b"PNG" {
        return None;
    }
    let w = u32::from_be_bytes(bytes[16..20].try_into().ok()?);
    let h = u32::from_be_bytes(bytes[20..24].try_into().ok()?);
    Some((w, h))
}
