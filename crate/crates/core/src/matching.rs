//! Questioned-image vs. camera-fingerprint matching: circular cross-correlation, signed
//! peak-to-correlation energy, and the threshold decision.

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::denoise::DenoiseConfig;
use crate::error::{ensure_same_shape, Error, Result};
use crate::fft::{fft2, ifft2_real};
use crate::fingerprint::{image_residual, nua_suppress, CameraFingerprint, NuaConfig};
use crate::image::Image;

/// Decision threshold on the signed PCE.
pub const DEFAULT_PCE_THRESHOLD: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakSearch {
    /// Aligned sensor: the peak is taken at zero shift.
    ZeroShiftOnly,
    /// Largest-magnitude entry anywhere in the plane.
    FullPlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub threshold: f64,
    pub peak_search: PeakSearch,
    /// Half-width of the square excluded around the peak; 5 gives an 11x11 block.
    pub exclusion_radius: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            threshold: DEFAULT_PCE_THRESHOLD,
            peak_search: PeakSearch::ZeroShiftOnly,
            exclusion_radius: 5,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::domain("PCE threshold must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PceResult {
    pub pce: f64,
    /// Cyclic shift `(row, col)` of the peak.
    pub peak_location: (usize, usize),
    pub correlation_peak: f64,
    pub threshold: f64,
    pub decision: bool,
}

fn centred(a: &Array2<f64>) -> (Array2<f64>, f64) {
    let mean = a.sum() / a.len() as f64;
    let c = a.mapv(|v| v - mean);
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    (c, norm)
}

/// Normalized circular cross-correlation `plane[s] = sum_x a(x) b(x + s) / (|a| |b|)` after
/// mean removal. An all-zero plane is returned when either input is constant.
pub fn cross_correlation_plane(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    ensure_same_shape(a.dim(), b.dim())?;
    let (a, na) = centred(a);
    let (b, nb) = centred(b);
    if na == 0.0 || nb == 0.0 {
        return Ok(Array2::zeros(a.dim()));
    }
    let fa = fft2(&a);
    let fb = fft2(&b);
    let product = Zip::from(&fa).and(&fb).map_collect(|x, y| x.conj() * y);
    Ok(ifft2_real(product) / (na * nb))
}

/// Extent of the cyclic exclusion block, clipped to the plane.
fn exclusion_count(shape: (usize, usize), radius: usize) -> (usize, usize) {
    let side = 2 * radius + 1;
    (side.min(shape.0), side.min(shape.1))
}

/// Signed PCE: `sign(peak) * peak^2 / mean(plane^2 outside the exclusion block)`.
pub fn signed_pce(plane: &Array2<f64>, cfg: &MatchConfig) -> Result<PceResult> {
    cfg.validate()?;
    let (rows, cols) = plane.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::domain("empty correlation plane"));
    }
    let (ex_r, ex_c) = exclusion_count((rows, cols), cfg.exclusion_radius);
    let excluded = ex_r * ex_c;
    if excluded >= rows * cols {
        return Err(Error::domain(format!(
            "exclusion block {ex_r}x{ex_c} covers the whole {rows}x{cols} plane"
        )));
    }
    let peak_location = match cfg.peak_search {
        PeakSearch::ZeroShiftOnly => (0, 0),
        PeakSearch::FullPlane => {
            let mut best = (0, 0);
            let mut best_abs = f64::NEG_INFINITY;
            for ((r, c), v) in plane.indexed_iter() {
                if v.abs() > best_abs {
                    best_abs = v.abs();
                    best = (r, c);
                }
            }
            best
        }
    };
    let peak = plane[peak_location];

    let cyclic_dist = |a: usize, b: usize, n: usize| {
        let d = (a + n - b) % n;
        d.min(n - d)
    };
    let radius = cfg.exclusion_radius;
    let outside: f64 = plane
        .indexed_iter()
        .filter(|((r, c), _)| {
            cyclic_dist(*r, peak_location.0, rows) > radius || cyclic_dist(*c, peak_location.1, cols) > radius
        })
        .map(|(_, v)| v * v)
        .sum();
    if outside <= 0.0 {
        return Err(Error::DegenerateInput(
            "correlation plane has no energy outside the peak neighbourhood".into(),
        ));
    }
    let energy = outside / (rows * cols - excluded) as f64;
    let pce = peak.signum() * peak * peak / energy;
    let pce = if peak == 0.0 { 0.0 } else { pce };
    Ok(PceResult {
        pce,
        peak_location,
        correlation_peak: peak,
        threshold: cfg.threshold,
        decision: pce > cfg.threshold,
    })
}

/// A questioned image reduced to what matching needs: its pixels and the spectrum of its
/// NUA-suppressed residual. Reusable against any number of fingerprints.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pixels: Array2<f64>,
    residual_spectrum_conj: Array2<Complex64>,
    residual_norm: f64,
}

impl PreparedQuery {
    pub fn new(image: &Image, denoise_cfg: &DenoiseConfig, nua_cfg: &NuaConfig) -> Result<Self> {
        let w = image_residual(image, denoise_cfg)?;
        let q = nua_suppress(w.values(), nua_cfg);
        let (q, norm) = centred(&q);
        Ok(PreparedQuery {
            pixels: image.pixels().clone(),
            residual_spectrum_conj: fft2(&q).mapv(|c| c.conj()),
            residual_norm: norm,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    /// Correlation plane between the residual and `fingerprint ⊙ image`.
    pub fn correlation_plane(&self, fp: &CameraFingerprint) -> Result<Array2<f64>> {
        ensure_same_shape(fp.shape(), self.shape())?;
        let product = fp.values() * &self.pixels;
        let (product, norm) = centred(&product);
        if norm == 0.0 || self.residual_norm == 0.0 {
            return Ok(Array2::zeros(self.shape()));
        }
        let spec = fft2(&product);
        let cross = Zip::from(&self.residual_spectrum_conj)
            .and(&spec)
            .map_collect(|a, b| a * b);
        Ok(ifft2_real(cross) / (norm * self.residual_norm))
    }

    pub fn score(&self, fp: &CameraFingerprint, cfg: &MatchConfig) -> Result<PceResult> {
        signed_pce(&self.correlation_plane(fp)?, cfg)
    }
}

/// Does `image` come from the camera behind `fp`?
pub fn match_image(
    image: &Image,
    fp: &CameraFingerprint,
    denoise_cfg: &DenoiseConfig,
    nua_cfg: &NuaConfig,
    cfg: &MatchConfig,
) -> Result<PceResult> {
    ensure_same_shape(fp.shape(), image.shape())?;
    PreparedQuery::new(image, denoise_cfg, nua_cfg)?.score(fp, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    fn roll(a: &Array2<f64>, dr: usize, dc: usize) -> Array2<f64> {
        let (rows, cols) = a.dim();
        Array2::from_shape_fn((rows, cols), |(r, c)| a[[(r + rows - dr) % rows, (c + cols - dc) % cols]])
    }

    #[test]
    fn autocorrelation_peaks_at_origin() {
        let a = random(16, 16, 1);
        let plane = cross_correlation_plane(&a, &a).unwrap();
        assert!((plane[[0, 0]] - 1.0).abs() < 1e-9);
        assert!(plane.iter().all(|v| *v <= plane[[0, 0]] + 1e-12));
    }

    #[test]
    fn shifted_copy_peaks_at_shift() {
        let a = random(32, 32, 2);
        let b = roll(&a, 3, 7);
        let plane = cross_correlation_plane(&a, &b).unwrap();
        let cfg = MatchConfig {
            peak_search: PeakSearch::FullPlane,
            ..MatchConfig::default()
        };
        let res = signed_pce(&plane, &cfg).unwrap();
        assert_eq!(res.peak_location, (3, 7));
        assert!((res.correlation_peak - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let err = cross_correlation_plane(&random(4, 4, 0), &random(4, 5, 0)).unwrap_err();
        assert_eq!(err.kind(), "shape_mismatch");
    }

    #[test]
    fn negative_peak_gives_negative_pce() {
        let mut plane = random(32, 32, 3) * 0.01;
        plane[[0, 0]] = -0.5;
        let res = signed_pce(&plane, &MatchConfig::default()).unwrap();
        assert!(res.pce < 0.0);
        assert!(!res.decision);
        assert_eq!(res.pce.signum(), res.correlation_peak.signum());
    }

    #[test]
    fn noise_only_plane_does_not_match() {
        let mut plane = random(64, 64, 4) * 0.01;
        plane[[0, 0]] = 0.0;
        let res = signed_pce(&plane, &MatchConfig::default()).unwrap();
        assert_eq!(res.pce, 0.0);
        assert!(!res.decision);
    }

    #[test]
    fn zero_plane_is_degenerate() {
        let err = signed_pce(&Array2::zeros((16, 16)), &MatchConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "degenerate_input");
    }

    #[test]
    fn exclusion_must_leave_something() {
        let cfg = MatchConfig {
            exclusion_radius: 8,
            ..MatchConfig::default()
        };
        assert!(signed_pce(&random(16, 16, 0), &cfg).is_err());
        let small = MatchConfig {
            exclusion_radius: 1,
            ..MatchConfig::default()
        };
        assert!(signed_pce(&random(4, 4, 0), &small).is_ok());
    }

    #[test]
    fn decision_flips_strictly_above_threshold() {
        let mut plane = random(32, 32, 5) * 0.01;
        plane[[0, 0]] = 0.2;
        let base = signed_pce(&plane, &MatchConfig::default()).unwrap();
        let at = MatchConfig {
            threshold: base.pce,
            ..MatchConfig::default()
        };
        assert!(!signed_pce(&plane, &at).unwrap().decision);
        let below = MatchConfig {
            threshold: base.pce - base.pce.abs() * 1e-12,
            ..MatchConfig::default()
        };
        assert!(signed_pce(&plane, &below).unwrap().decision);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pce_is_scale_invariant(seed in any::<u64>(), scale in 1e-3f64..1e3) {
            let plane = random(24, 24, seed);
            let cfg = MatchConfig::default();
            let a = signed_pce(&plane, &cfg).unwrap();
            let b = signed_pce(&(&plane * scale), &cfg).unwrap();
            prop_assert!((a.pce - b.pce).abs() <= 1e-9 * a.pce.abs().max(1e-12));
        }

        #[test]
        fn decision_monotone_in_threshold(seed in any::<u64>(), t1 in -100.0f64..200.0, dt in 0.0f64..100.0) {
            let mut plane = random(24, 24, seed) * 0.05;
            plane[[0, 0]] = 0.3;
            let lo = signed_pce(&plane, &MatchConfig { threshold: t1, ..MatchConfig::default() }).unwrap();
            let hi = signed_pce(&plane, &MatchConfig { threshold: t1 + dt, ..MatchConfig::default() }).unwrap();
            prop_assert!(!hi.decision || lo.decision);
        }
    }
}
