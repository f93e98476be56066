//! Image containers and acquisition metadata.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted side length; a 4-level wavelet pyramid needs at least this much.
pub const MIN_IMAGE_SIDE: usize = 64;

/// Exposure setting an image was captured with, relative to the camera's automatic choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExposureType {
    Auto,
    Over,
    Under,
}

impl ExposureType {
    pub const ALL: [ExposureType; 3] = [ExposureType::Auto, ExposureType::Over, ExposureType::Under];

    pub fn as_str(self) -> &'static str {
        match self {
            ExposureType::Auto => "auto",
            ExposureType::Over => "over",
            ExposureType::Under => "under",
        }
    }
}

impl fmt::Display for ExposureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExposureType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(ExposureType::Auto),
            "over" => Ok(ExposureType::Over),
            "under" => Ok(ExposureType::Under),
            other => Err(Error::domain(format!(
                "unknown exposure type {other:?} (expected auto, over or under)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub camera_id: String,
    pub camera_model: String,
    pub scene_id: String,
    pub exposure_type: ExposureType,
    pub iso: f64,
    pub exposure_time_s: f64,
    pub f_number: f64,
}

impl ImageMeta {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iso", self.iso),
            ("exposure_time_s", self.exposure_time_s),
            ("f_number", self.f_number),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Placeholder metadata for images that arrive without acquisition records.
    pub fn unknown() -> Self {
        ImageMeta {
            camera_id: String::new(),
            camera_model: String::new(),
            scene_id: String::new(),
            exposure_type: ExposureType::Auto,
            iso: 100.0,
            exposure_time_s: 1.0,
            f_number: 1.0,
        }
    }
}

/// Single-channel intensity image, values in `[0, 255]`, stored row-major as `(height, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array2<f64>,
    meta: ImageMeta,
}

impl Image {
    pub fn new(pixels: Array2<f64>, meta: ImageMeta) -> Result<Self> {
        let (h, w) = pixels.dim();
        if h < MIN_IMAGE_SIDE || w < MIN_IMAGE_SIDE {
            return Err(Error::domain(format!(
                "image is {w}x{h}; both sides must be at least {MIN_IMAGE_SIDE}"
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::domain(format!(
                "pixel value {bad} outside [0, 255]"
            )));
        }
        meta.validate()?;
        Ok(Image { pixels, meta })
    }

    pub fn from_luma8(width: usize, height: usize, data: &[u8], meta: ImageMeta) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::domain(format!(
                "buffer holds {} bytes, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        let pixels = Array2::from_shape_fn((height, width), |(r, c)| f64::from(data[r * width + c]));
        Image::new(pixels, meta)
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn meta(&self) -> &ImageMeta {
        &self.meta
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    /// `(height, width)`
    pub fn shape(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn into_parts(self) -> (Array2<f64>, ImageMeta) {
        (self.pixels, self.meta)
    }
}

/// Luminance from 8-bit RGB using the Rec. 601 weights.
pub fn luminance(r: u8, g: u8, b: u8) -> f64 {
    0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)
}

/// Noise residual `I - F(I)` of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseResidual {
    values: Array2<f64>,
}

impl NoiseResidual {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("noise residual contains non-finite values"));
        }
        Ok(NoiseResidual { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}
