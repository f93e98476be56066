//! Per-image noise residuals and the maximum-likelihood camera fingerprint.

mod format;
mod nua;
mod saturation;

pub use format::{read_fingerprint, write_fingerprint, FINGERPRINT_MAGIC, FINGERPRINT_VERSION};
pub use nua::{nua_suppress, wiener_dft, zero_mean, NuaConfig};
pub use saturation::{saturation_mask, Neighborhood, SaturationRule};

use std::path::Path;

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::denoise::{self, DenoiseConfig};
use crate::error::{ensure_same_shape, Error, Result};
use crate::image::{Image, NoiseResidual};

/// Estimated sensor PRNU of one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFingerprint {
    values: Array2<f64>,
    n_images: usize,
    /// Pixels with no usable contribution from any image (all saturated or zero intensity).
    mask: Array2<bool>,
    pub camera_id: String,
    pub camera_model: String,
}

impl CameraFingerprint {
    pub fn from_parts(
        values: Array2<f64>,
        mask: Array2<bool>,
        n_images: usize,
        camera_id: impl Into<String>,
        camera_model: impl Into<String>,
    ) -> Result<Self> {
        ensure_same_shape(values.dim(), mask.dim())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("fingerprint contains non-finite values"));
        }
        if n_images == 0 {
            return Err(Error::domain("fingerprint must come from at least one image"));
        }
        Ok(CameraFingerprint {
            values,
            n_images,
            mask,
            camera_id: camera_id.into(),
            camera_model: camera_model.into(),
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn n_images(&self) -> usize {
        self.n_images
    }

    /// `(height, width)`
    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        write_fingerprint(self, &mut w).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        read_fingerprint(&mut std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }
}

/// `W = I - F(I)` at full precision.
pub fn image_residual(image: &Image, cfg: &DenoiseConfig) -> Result<NoiseResidual> {
    NoiseResidual::new(denoise::residual(image.pixels(), cfg)?)
}

/// Running numerator `sum W*I` and denominator `sum I^2` over unmasked pixels.
#[derive(Debug, Clone)]
struct MleSums {
    numerator: Array2<f64>,
    denominator: Array2<f64>,
    n_images: usize,
}

impl MleSums {
    fn new(shape: (usize, usize)) -> Self {
        MleSums {
            numerator: Array2::zeros(shape),
            denominator: Array2::zeros(shape),
            n_images: 0,
        }
    }

    fn add(&mut self, image: &Image, residual: &NoiseResidual, saturated: &Array2<bool>) {
        Zip::from(&mut self.numerator)
            .and(&mut self.denominator)
            .and(image.pixels())
            .and(residual.values())
            .and(saturated)
            .for_each(|num, den, &i, &w, &sat| {
                if !sat {
                    *num += w * i;
                    *den += i * i;
                }
            });
        self.n_images += 1;
    }

    /// Pointwise ratio with zero-denominator pixels set to 0 and flagged.
    fn ratio(&self) -> (Array2<f64>, Array2<bool>) {
        let mask = self.denominator.mapv(|d| d <= 0.0);
        let ratio = Zip::from(&self.numerator)
            .and(&self.denominator)
            .map_collect(|&n, &d| if d > 0.0 { n / d } else { 0.0 });
        (ratio, mask)
    }
}

fn check_shapes(images: &[Image]) -> Result<(usize, usize)> {
    let shape = images[0].shape();
    for img in &images[1..] {
        ensure_same_shape(shape, img.shape())?;
    }
    Ok(shape)
}

fn accumulate(
    images: &[Image],
    denoise_cfg: &DenoiseConfig,
    rule: &SaturationRule,
) -> Result<MleSums> {
    let shape = check_shapes(images)?;
    let residuals: Vec<NoiseResidual> = images
        .par_iter()
        .map(|img| image_residual(img, denoise_cfg))
        .collect::<Result<_>>()?;
    // Fixed summation order keeps the estimate bit-identical for any worker count.
    let mut sums = MleSums::new(shape);
    for (img, w) in images.iter().zip(&residuals) {
        sums.add(img, w, &saturation_mask(img, rule));
    }
    Ok(sums)
}

/// Maximum-likelihood fingerprint `G(sum W_i I_i / sum I_i^2)` from at least two images of
/// one camera.
pub fn estimate_camera_fingerprint(
    images: &[Image],
    denoise_cfg: &DenoiseConfig,
    nua_cfg: &NuaConfig,
    rule: &SaturationRule,
) -> Result<CameraFingerprint> {
    if images.len() < 2 {
        return Err(Error::domain(format!(
            "fingerprint estimation needs n >= 2 images, got {}",
            images.len()
        )));
    }
    denoise_cfg.validate()?;
    rule.validate()?;
    let sums = accumulate(images, denoise_cfg, rule)?;
    let (ratio, mask) = sums.ratio();
    let meta = images[0].meta();
    CameraFingerprint::from_parts(
        nua_suppress(&ratio, nua_cfg),
        mask,
        sums.n_images,
        meta.camera_id.clone(),
        meta.camera_model.clone(),
    )
}
