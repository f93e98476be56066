//! Wavelet-domain adaptive Wiener denoising: the scene-suppression filter whose complement is
//! the noise residual.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_shape, Error, Result};
use crate::wavelet::{self, FilterBank};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    pub wavelet: FilterBank,
    pub levels: usize,
    /// Assumed standard deviation of the noise to strip, in intensity units.
    pub sigma0: f64,
    pub variance_window_sizes: Vec<usize>,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            wavelet: FilterBank::daubechies8(),
            levels: 4,
            sigma0: 3.0,
            variance_window_sizes: vec![3, 5, 7, 9],
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::domain("denoise levels must be >= 1"));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::domain(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        if self.variance_window_sizes.is_empty() {
            return Err(Error::domain("at least one variance window size is required"));
        }
        for &w in &self.variance_window_sizes {
            check_window(w)?;
        }
        if self.wavelet.lowpass.len() != self.wavelet.highpass.len() || self.wavelet.lowpass.len() % 2 != 0 {
            return Err(Error::domain("wavelet filters must be of equal, even length"));
        }
        Ok(())
    }
}

fn check_window(window: usize) -> Result<()> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::domain(format!(
            "variance window must be odd and >= 3, got {window}"
        )));
    }
    Ok(())
}

/// Circular moving mean with a centred odd window along both axes.
fn circular_box_mean(values: &Array2<f64>, window: usize) -> Array2<f64> {
    let (rows, cols) = values.dim();
    let half = (window / 2) as isize;
    let wrap = |i: isize, n: usize| i.rem_euclid(n as isize) as usize;
    let mut horiz = Array2::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for d in -half..=half {
                acc += values[[r, wrap(c as isize + d, cols)]];
            }
            horiz[[r, c]] = acc;
        }
    }
    let scale = 1.0 / (window * window) as f64;
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for d in -half..=half {
                acc += horiz[[wrap(r as isize + d, rows), c]];
            }
            out[[r, c]] = acc * scale;
        }
    }
    out
}

/// `max(0, mean(x^2 over window) - sigma0^2)` per coefficient, circular boundary.
pub fn local_variance(subband: &Array2<f64>, window: usize, sigma0: f64) -> Result<Array2<f64>> {
    check_window(window)?;
    let noise_var = sigma0 * sigma0;
    let squares = subband.mapv(|v| v * v);
    Ok(circular_box_mean(&squares, window).mapv_into(|m| (m - noise_var).max(0.0)))
}

/// Per-coefficient minimum of [`local_variance`] over all window sizes.
pub fn estimate_variance(subband: &Array2<f64>, windows: &[usize], sigma0: f64) -> Result<Array2<f64>> {
    let (first, rest) = windows
        .split_first()
        .ok_or_else(|| Error::domain("at least one variance window size is required"))?;
    let mut best = local_variance(subband, *first, sigma0)?;
    for &w in rest {
        let est = local_variance(subband, w, sigma0)?;
        Zip::from(&mut best).and(&est).for_each(|b, &e| *b = b.min(e));
    }
    Ok(best)
}

/// Wiener shrinkage `x * var / (var + sigma0^2)`.
pub fn wiener_attenuate(subband: &Array2<f64>, variance: &Array2<f64>, sigma0: f64) -> Result<Array2<f64>> {
    ensure_same_shape(subband.dim(), variance.dim())?;
    let noise_var = sigma0 * sigma0;
    Ok(Zip::from(subband).and(variance).map_collect(|&x, &v| {
        if v.is_infinite() {
            x
        } else {
            x * v / (v + noise_var)
        }
    }))
}

/// The denoised plane `F(plane)`: detail subbands Wiener-shrunk, approximation untouched.
pub fn denoise(plane: &Array2<f64>, cfg: &DenoiseConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let mut pyramid = wavelet::dwt2(plane, cfg.levels, &cfg.wavelet)?;
    for bands in &mut pyramid.details {
        for band in bands.iter_mut() {
            let var = estimate_variance(band, &cfg.variance_window_sizes, cfg.sigma0)?;
            *band = wiener_attenuate(band, &var, cfg.sigma0)?;
        }
    }
    Ok(wavelet::idwt2(&pyramid, &cfg.wavelet))
}

/// `plane - F(plane)`.
pub fn residual(plane: &Array2<f64>, cfg: &DenoiseConfig) -> Result<Array2<f64>> {
    let smooth = denoise(plane, cfg)?;
    Ok(plane - &smooth)
}
