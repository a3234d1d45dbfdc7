//! Raster value types shared by every stage, image/mask I/O and the IU metric.

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageError, ImageFormat, ImageReader, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pixel coordinate. Ordering is lexicographic on `(row, col)`, which is the
/// tie-break order used by every argmax in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Squared Euclidean distance, exact in integers.
    pub fn dist_sq(self, other: Pixel) -> u64 {
        let dr = self.row.abs_diff(other.row) as u64;
        let dc = self.col.abs_diff(other.col) as u64;
        dr * dr + dc * dc
    }
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter(format!(
            "raster dimensions must be positive, got {height}x{width}"
        )));
    }
    Ok(())
}

/// An 8-bit RGB raster stored row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn from_raw(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * 3 {
            return Err(Error::InvalidParameter(format!(
                "expected {} RGB bytes for {height}x{width}, got {}",
                height * width * 3,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        check_dims(height, width)?;
        let mut data = Vec::with_capacity(height * width * 3);
        for row in 0..height {
            for col in 0..width {
                data.extend_from_slice(&f(row, col));
            }
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn flip_horizontal(&self) -> Image {
        let mut data = Vec::with_capacity(self.data.len());
        for row in 0..self.height {
            for col in (0..self.width).rev() {
                data.extend_from_slice(&self.pixel(row, col));
            }
        }
        Image { height: self.height, width: self.width, data }
    }

    fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction")
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, ImageFormat::Png)
            .expect("PNG encoding into memory cannot fail");
        out.into_inner()
    }

    /// Decodes an in-memory PNG (or PNM) stream.
    pub fn from_encoded(bytes: &[u8]) -> Result<Image> {
        let reader = ImageReader::new(Cursor::new(bytes))
            .with_guessed_format()
            .expect("cursor reads are infallible");
        let origin = Path::new("<memory>");
        if reader.format().is_none() {
            return Err(Error::UnsupportedFormat(origin.to_path_buf()));
        }
        let decoded = reader.decode().map_err(|e| map_image_error(origin, e))?;
        rgb_from_dynamic(decoded.to_rgb8())
    }
}

fn rgb_from_dynamic(rgb: RgbImage) -> Result<Image> {
    let (w, h) = rgb.dimensions();
    Image::from_raw(h as usize, w as usize, rgb.into_raw())
}

/// A binary labeling: `true` is object, `false` is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize) -> Self {
        Self::filled(height, width, false)
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "expected {} mask values for {height}x{width}, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn at(&self, p: Pixel) -> bool {
        self.get(p.row, p.col)
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Object pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let width = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| Pixel::new(i / width, i % width))
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    pub fn intersects(&self, other: &BinaryMask) -> bool {
        self.data.iter().zip(&other.data).any(|(a, b)| *a && *b)
    }

    pub fn flip_horizontal(&self) -> BinaryMask {
        BinaryMask::from_fn(self.height, self.width, |r, c| self.get(r, self.width - 1 - c))
    }

    /// The `height x width` window with top-left corner `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<BinaryMask> {
        if height == 0 || width == 0 || row + height > self.height || col + width > self.width {
            return Err(Error::InvalidParameter(format!(
                "crop {height}x{width} at ({row}, {col}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        Ok(BinaryMask::from_fn(height, width, |r, c| self.get(row + r, col + c)))
    }

    /// Smallest `(row0, col0, row1, col1)` (inclusive) containing every object pixel.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for p in self.pixels() {
            bb = Some(match bb {
                None => (p.row, p.col, p.row, p.col),
                Some((r0, c0, r1, c1)) => (r0.min(p.row), c0.min(p.col), r1.max(p.row), c1.max(p.col)),
            });
        }
        bb
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch { expected: dims, actual: self.dims() });
        }
        Ok(())
    }

    fn to_gray_image(&self) -> GrayImage {
        let bytes = self.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    /// Single-channel PNG with 0 for background and 255 for object.
    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        self.to_gray_image()
            .write_to(&mut out, ImageFormat::Png)
            .expect("PNG encoding into memory cannot fail");
        out.into_inner()
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<BinaryMask> {
        let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| map_image_error(Path::new("<memory>"), e))?;
        Ok(mask_from_gray(decoded.to_luma8()))
    }
}

fn mask_from_gray(gray: GrayImage) -> BinaryMask {
    let (w, h) = gray.dimensions();
    BinaryMask {
        height: h as usize,
        width: w as usize,
        data: gray.into_raw().into_iter().map(|b| b >= 128).collect(),
    }
}

/// Per-pixel object probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ProbabilityMap {
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "expected {} probabilities for {height}x{width}, got {}",
                height * width,
                data.len()
            )));
        }
        for (i, &q) in data.iter().enumerate() {
            if !q.is_finite() {
                return Err(Error::NonFiniteProbability { row: i / width, col: i % width });
            }
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidParameter(format!(
                    "probability {q} at ({}, {}) outside [0, 1]",
                    i / width,
                    i % width
                )));
            }
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, q: f64) -> Result<Self> {
        Self::from_vec(height, width, vec![q; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `q > 0.5` labeling.
    pub fn threshold(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&q| q > 0.5).collect(),
        }
    }
}

fn map_image_error(path: &Path, err: ImageError) -> Error {
    match err {
        ImageError::Unsupported(_) => Error::UnsupportedFormat(path.to_path_buf()),
        ImageError::IoError(e) => Error::io(path, e),
        other => Error::CorruptData { path: path.to_path_buf(), reason: other.to_string() },
    }
}

fn open_decoded(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = if reader.format().is_none() {
        reader.with_guessed_format().map_err(|e| Error::io(path, e))?
    } else {
        reader
    };
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    reader.decode().map_err(|e| map_image_error(path, e))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    rgb_from_dynamic(open_decoded(path)?.to_rgb8())
}

pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, image.to_png_bytes()).map_err(|e| Error::io(path, e))
}

/// Loads a mask; any sample `>= 128` is object.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    Ok(mask_from_gray(open_decoded(path)?.to_luma8()))
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, mask.to_png_bytes()).map_err(|e| Error::io(path, e))
}

/// Intersection over union of the object pixels. Two empty masks score 1.0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    b.ensure_dims(a.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
