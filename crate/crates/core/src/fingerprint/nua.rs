//! Suppression of non-unique artifacts: row/column structure shared by every camera of a model,
//! and periodic patterns that show up as isolated peaks in the spectrum.

use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::denoise::estimate_variance;
use crate::fft::{fft2, ifft2_real};

const SPECTRUM_WINDOWS: [usize; 4] = [3, 5, 7, 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuaConfig {
    pub zero_mean: bool,
    pub wiener_dft: bool,
    /// Noise level for the spectral Wiener stage; `None` uses the standard deviation of the
    /// matrix being filtered.
    pub wiener_dft_sigma: Option<f64>,
}

impl Default for NuaConfig {
    fn default() -> Self {
        NuaConfig {
            zero_mean: true,
            wiener_dft: true,
            wiener_dft_sigma: None,
        }
    }
}

/// Subtract every row mean, then every column mean.
pub fn zero_mean(matrix: &Array2<f64>) -> Array2<f64> {
    let mut out = matrix.to_owned();
    let rows = out.mean_axis(Axis(1)).expect("non-empty");
    for (mut row, m) in out.axis_iter_mut(Axis(0)).zip(rows.iter()) {
        row -= *m;
    }
    let cols = out.mean_axis(Axis(0)).expect("non-empty");
    for mut row in out.axis_iter_mut(Axis(0)) {
        row -= &cols;
    }
    out
}

fn global_std(matrix: &Array2<f64>) -> f64 {
    let n = matrix.len() as f64;
    let mean = matrix.sum() / n;
    (matrix.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Attenuate frequency bins whose magnitude stands out from their spectral neighbourhood.
///
/// Magnitudes are normalized by `sqrt(rows * cols)` so white noise of standard deviation
/// `sigma` sits at magnitude ~`sigma`. Each bin keeps the noise-like share
/// `sigma^2 / (var + sigma^2)` of its magnitude, where `var` is the local excess variance.
/// Phases are left untouched.
pub fn wiener_dft(matrix: &Array2<f64>, sigma: Option<f64>) -> Array2<f64> {
    let sigma = sigma.unwrap_or_else(|| global_std(matrix));
    if !(sigma.is_finite() && sigma > 0.0) {
        return matrix.to_owned();
    }
    let noise_var = sigma * sigma;
    let mut spectrum = fft2(matrix);
    let norm = (matrix.len() as f64).sqrt();
    let magnitude = spectrum.mapv(|c| c.norm() / norm);
    let var = estimate_variance(&magnitude, &SPECTRUM_WINDOWS, sigma).expect("fixed windows are valid");
    Zip::from(&mut spectrum)
        .and(&var)
        .for_each(|bin, &v| *bin *= noise_var / (v + noise_var));
    ifft2_real(spectrum)
}

/// Apply the enabled stages in order: zero-mean, then spectral Wiener.
pub fn nua_suppress(matrix: &Array2<f64>, cfg: &NuaConfig) -> Array2<f64> {
    let mut out = if cfg.zero_mean {
        zero_mean(matrix)
    } else {
        matrix.to_owned()
    };
    if cfg.wiener_dft {
        out = wiener_dft(&out, cfg.wiener_dft_sigma);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn max_row_col_mean(m: &Array2<f64>) -> f64 {
        let r = m.mean_axis(Axis(1)).unwrap().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let c = m.mean_axis(Axis(0)).unwrap().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        r.max(c)
    }

    #[test]
    fn zero_mean_rows_and_columns() {
        let m = Array2::from_shape_fn((7, 9), |(r, c)| (r * r) as f64 + 3.0 * c as f64 + ((r * c) % 5) as f64);
        let z = zero_mean(&m);
        assert!(max_row_col_mean(&z) < 1e-12);
    }

    #[test]
    fn row_constant_matrix_vanishes() {
        let m = Array2::from_shape_fn((8, 8), |(r, _)| r as f64 * 10.0);
        let z = nua_suppress(
            &m,
            &NuaConfig {
                wiener_dft: false,
                ..NuaConfig::default()
            },
        );
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn full_chain_keeps_zero_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let m = Array2::from_shape_fn((32, 48), |(r, _)| normal.sample(&mut rng) + r as f64 * 0.1);
        let z = nua_suppress(&m, &NuaConfig::default());
        assert!(max_row_col_mean(&z) < 1e-9);
    }

    #[test]
    fn spectral_peak_is_suppressed() {
        let (rows, cols) = (64, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let noise = Array2::from_shape_fn((rows, cols), |_| normal.sample(&mut rng));
        // A cosine at bin (5, 9) whose normalized magnitude is ~100x the noise floor.
        let amp = 200.0 / (rows as f64 * cols as f64).sqrt();
        let tau = std::f64::consts::TAU;
        let m = Array2::from_shape_fn((rows, cols), |(r, c)| {
            noise[[r, c]] + amp * (tau * (5.0 * r as f64 / rows as f64 + 9.0 * c as f64 / cols as f64)).cos()
        });
        let before = fft2(&m).mapv(|c| c.norm());
        let after = fft2(&wiener_dft(&m, None)).mapv(|c| c.norm());
        assert!(before[[5, 9]] / after[[5, 9]] > 10.0);

        let mut changes: Vec<f64> = before
            .iter()
            .zip(after.iter())
            .filter(|(b, _)| **b > 0.0)
            .map(|(b, a)| (b - a).abs() / b)
            .collect();
        changes.sort_by(f64::total_cmp);
        let median_change = changes[changes.len() / 2];
        assert!(median_change < 0.10, "median bin changed by {median_change}");
    }

    #[test]
    fn zero_matrix_passes_through() {
        let z = nua_suppress(&Array2::zeros((8, 8)), &NuaConfig::default());
        assert!(z.iter().all(|v| *v == 0.0));
    }
}
