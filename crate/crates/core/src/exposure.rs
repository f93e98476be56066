//! Exposure-value arithmetic and auto/over/under classification from ISO and shutter time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ExposureType, ImageMeta};

/// Relative tolerance when matching ISO/time ratios against the programmed offsets.
pub const EXPOSURE_RATIO_TOLERANCE: f64 = 0.10;

/// (ISO ratio, exposure-time ratio) programmed for each off-nominal setting.
pub const OVER_RATIOS: (f64, f64) = (3.0, 2.0);
pub const UNDER_RATIOS: (f64, f64) = (0.5, 0.5);

/// Exposure value in stops relative to the ISO-100 exposure value of the same scene.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ExposureValue {
    pub ev_rel_100: f64,
}

/// `log2(iso / 100) + log2(t / t_ref)`, with `t_ref = 1 s` when no auto-exposure time is known.
///
/// This counts the light gathered (ISO gain and shutter time both), so an image shot at
/// three times the ISO and twice the exposure time sits `log2 6` stops above its auto capture.
pub fn exposure_value_rel(meta: &ImageMeta, reference_time_s: Option<f64>) -> Result<ExposureValue> {
    if !(meta.iso.is_finite() && meta.iso > 0.0) {
        return Err(Error::domain(format!("iso must be positive, got {}", meta.iso)));
    }
    if !(meta.exposure_time_s.is_finite() && meta.exposure_time_s > 0.0) {
        return Err(Error::domain(format!(
            "exposure time must be positive, got {}",
            meta.exposure_time_s
        )));
    }
    let t_ref = reference_time_s.unwrap_or(1.0);
    if !(t_ref.is_finite() && t_ref > 0.0) {
        return Err(Error::domain(format!("reference exposure time must be positive, got {t_ref}")));
    }
    Ok(ExposureValue {
        ev_rel_100: (meta.iso / 100.0).log2() + (meta.exposure_time_s / t_ref).log2(),
    })
}

fn near(ratio: f64, target: f64) -> bool {
    (ratio / target - 1.0).abs() <= EXPOSURE_RATIO_TOLERANCE
}

/// Classify `candidate` against the auto-exposed capture of the same scene.
pub fn classify_exposure_offset(auto: &ImageMeta, candidate: &ImageMeta) -> Result<ExposureType> {
    auto.validate()?;
    candidate.validate()?;
    let iso_ratio = candidate.iso / auto.iso;
    let time_ratio = candidate.exposure_time_s / auto.exposure_time_s;
    let matches = |(iso, time): (f64, f64)| near(iso_ratio, iso) && near(time_ratio, time);
    if matches((1.0, 1.0)) {
        Ok(ExposureType::Auto)
    } else if matches(OVER_RATIOS) {
        Ok(ExposureType::Over)
    } else if matches(UNDER_RATIOS) {
        Ok(ExposureType::Under)
    } else {
        Err(Error::UnclassifiableExposure {
            iso_ratio,
            time_ratio,
        })
    }
}
