//! Periodized orthonormal 2-D discrete wavelet transform with the 8-tap Daubechies filter.
//!
//! Each level filters rows then columns with circular extension and decimates by two, so a
//! plane whose sides are multiples of `2^levels` maps onto a pyramid with exactly as many
//! coefficients. Other sizes are first extended by mirror reflection at the bottom and right
//! edges and cropped back on reconstruction.

use ndarray::{s, Array2, ArrayView1, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Daubechies 8-tap (four vanishing moments) scaling filter, unit energy, DC gain sqrt(2).
pub const DAUBECHIES_8: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_6,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_08,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

/// Quadrature-mirror analysis/synthesis pair. The bank is orthonormal, so synthesis reuses
/// the analysis taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl FilterBank {
    pub fn from_scaling(lowpass: &[f64]) -> Self {
        let n = lowpass.len();
        let highpass = (0..n)
            .map(|k| if k % 2 == 0 { lowpass[n - 1 - k] } else { -lowpass[n - 1 - k] })
            .collect();
        FilterBank {
            lowpass: lowpass.to_vec(),
            highpass,
        }
    }

    pub fn daubechies8() -> Self {
        Self::from_scaling(&DAUBECHIES_8)
    }
}

impl Default for FilterBank {
    fn default() -> Self {
        Self::daubechies8()
    }
}

/// Detail subbands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    /// Lowpass along rows, highpass along columns.
    pub lh: Array2<f64>,
    /// Highpass along rows, lowpass along columns.
    pub hl: Array2<f64>,
    pub hh: Array2<f64>,
}

impl DetailBands {
    pub fn iter(&self) -> impl Iterator<Item = &Array2<f64>> {
        [&self.lh, &self.hl, &self.hh].into_iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        [&mut self.lh, &mut self.hl, &mut self.hh].into_iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    /// Finest level first.
    pub details: Vec<DetailBands>,
    pub approx: Array2<f64>,
    /// Shape of the plane handed to [`dwt2`].
    pub original_shape: (usize, usize),
    /// Shape after mirror extension to a multiple of `2^levels`.
    pub padded_shape: (usize, usize),
}

impl Pyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Sum of squared coefficients over all subbands.
    pub fn energy(&self) -> f64 {
        let sq = |a: &Array2<f64>| a.iter().map(|v| v * v).sum::<f64>();
        sq(&self.approx) + self.details.iter().flat_map(|d| d.iter()).map(sq).sum::<f64>()
    }
}

fn analyze_1d(x: ArrayView1<f64>, bank: &FilterBank, lo: ArrayViewMut1<f64>, hi: ArrayViewMut1<f64>) {
    let n = x.len();
    let (mut lo, mut hi) = (lo, hi);
    for k in 0..n / 2 {
        let (mut a, mut d) = (0.0, 0.0);
        for (t, (&h, &g)) in bank.lowpass.iter().zip(&bank.highpass).enumerate() {
            let v = x[(2 * k + t) % n];
            a += h * v;
            d += g * v;
        }
        lo[k] = a;
        hi[k] = d;
    }
}

fn synthesize_1d(lo: ArrayView1<f64>, hi: ArrayView1<f64>, bank: &FilterBank, mut out: ArrayViewMut1<f64>) {
    let n = out.len();
    out.fill(0.0);
    for k in 0..n / 2 {
        let (a, d) = (lo[k], hi[k]);
        for (t, (&h, &g)) in bank.lowpass.iter().zip(&bank.highpass).enumerate() {
            out[(2 * k + t) % n] += h * a + g * d;
        }
    }
}

/// One analysis level: returns (LL, LH, HL, HH), each half size in both directions.
fn analyze_level(plane: &Array2<f64>, bank: &FilterBank) -> [Array2<f64>; 4] {
    let (rows, cols) = plane.dim();
    let (hr, hc) = (rows / 2, cols / 2);
    let mut row_lo = Array2::zeros((rows, hc));
    let mut row_hi = Array2::zeros((rows, hc));
    for r in 0..rows {
        analyze_1d(plane.row(r), bank, row_lo.row_mut(r), row_hi.row_mut(r));
    }
    let split_cols = |src: &Array2<f64>| {
        let mut lo = Array2::zeros((hr, hc));
        let mut hi = Array2::zeros((hr, hc));
        for c in 0..hc {
            analyze_1d(src.column(c), bank, lo.column_mut(c), hi.column_mut(c));
        }
        (lo, hi)
    };
    let (ll, lh) = split_cols(&row_lo);
    let (hl, hh) = split_cols(&row_hi);
    [ll, lh, hl, hh]
}

fn synthesize_level(ll: &Array2<f64>, bands: &DetailBands, bank: &FilterBank) -> Array2<f64> {
    let (hr, hc) = ll.dim();
    let (rows, cols) = (hr * 2, hc * 2);
    let merge_cols = |lo: &Array2<f64>, hi: &Array2<f64>| {
        let mut out = Array2::zeros((rows, hc));
        for c in 0..hc {
            synthesize_1d(lo.column(c), hi.column(c), bank, out.column_mut(c));
        }
        out
    };
    let row_lo = merge_cols(ll, &bands.lh);
    let row_hi = merge_cols(&bands.hl, &bands.hh);
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        synthesize_1d(row_lo.row(r), row_hi.row(r), bank, out.row_mut(r));
    }
    out
}

fn padded_len(n: usize, block: usize) -> usize {
    n.div_ceil(block) * block
}

/// Extend `plane` at its trailing edges by whole-sample mirror reflection
/// (`x[n + i] = x[n - 1 - i]`).
pub(crate) fn mirror_pad(plane: &Array2<f64>, shape: (usize, usize)) -> Array2<f64> {
    let (rows, cols) = plane.dim();
    if (rows, cols) == shape {
        return plane.clone();
    }
    let reflect = |i: usize, n: usize| {
        let period = 2 * n;
        let m = i % period;
        if m < n {
            m
        } else {
            period - 1 - m
        }
    };
    Array2::from_shape_fn(shape, |(r, c)| plane[[reflect(r, rows), reflect(c, cols)]])
}

pub(crate) fn check_levels(shape: (usize, usize), levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::domain("wavelet decomposition needs at least one level"));
    }
    let min = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| Error::domain(format!("{levels} wavelet levels is too many")))?;
    if shape.0 < min || shape.1 < min {
        return Err(Error::domain(format!(
            "plane {}x{} is smaller than 2^{levels} = {min} in some dimension",
            shape.1, shape.0
        )));
    }
    Ok(())
}

/// Forward transform over `levels` levels.
pub fn dwt2(plane: &Array2<f64>, levels: usize, bank: &FilterBank) -> Result<Pyramid> {
    let original_shape = plane.dim();
    check_levels(original_shape, levels)?;
    let block = 1usize << levels;
    let padded_shape = (
        padded_len(original_shape.0, block),
        padded_len(original_shape.1, block),
    );
    let mut current = mirror_pad(plane, padded_shape);
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let [ll, lh, hl, hh] = analyze_level(&current, bank);
        details.push(DetailBands { lh, hl, hh });
        current = ll;
    }
    Ok(Pyramid {
        details,
        approx: current,
        original_shape,
        padded_shape,
    })
}

/// Inverse of [`dwt2`], cropped back to the original shape.
pub fn idwt2(pyramid: &Pyramid, bank: &FilterBank) -> Array2<f64> {
    let mut current = pyramid.approx.clone();
    for bands in pyramid.details.iter().rev() {
        current = synthesize_level(&current, bands, bank);
    }
    let (rows, cols) = pyramid.original_shape;
    if current.dim() == (rows, cols) {
        current
    } else {
        current.slice(s![..rows, ..cols]).to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-100.0..100.0))
    }

    #[test]
    fn filter_is_orthonormal() {
        let h = DAUBECHIES_8;
        assert!((h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-15);
        for shift in 0..4 {
            let dot: f64 = (0..8 - 2 * shift).map(|i| h[i] * h[i + 2 * shift]).sum();
            let expected = if shift == 0 { 1.0 } else { 0.0 };
            assert!((dot - expected).abs() < 1e-15, "shift {shift}: {dot}");
        }
        let bank = FilterBank::daubechies8();
        assert!(bank.highpass.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn constant_plane_has_no_detail() {
        let c = 42.5;
        let plane = Array2::from_elem((64, 64), c);
        let pyr = dwt2(&plane, 4, &FilterBank::default()).unwrap();
        for bands in &pyr.details {
            for band in bands.iter() {
                assert!(band.iter().all(|v| v.abs() < 1e-12));
            }
        }
        // Each level multiplies the DC level by sqrt(2) along each axis.
        let dc = c * 2f64.powi(4);
        assert!(pyr.approx.iter().all(|v| (v - dc).abs() < 1e-10));
    }

    #[test]
    fn round_trip_random_64() {
        let bank = FilterBank::default();
        let plane = random_plane(64, 64, 1);
        let back = idwt2(&dwt2(&plane, 4, &bank).unwrap(), &bank);
        let err = (&back - &plane).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-9, "max error {err}");
    }

    #[test]
    fn round_trip_odd_sizes() {
        let bank = FilterBank::default();
        for (rows, cols) in [(17, 23), (65, 80), (100, 71)] {
            let plane = random_plane(rows, cols, rows as u64);
            let pyr = dwt2(&plane, 4, &bank).unwrap();
            assert_eq!(pyr.padded_shape.0 % 16, 0);
            assert_eq!(pyr.padded_shape.1 % 16, 0);
            let back = idwt2(&pyr, &bank);
            assert_eq!(back.dim(), (rows, cols));
            let err = (&back - &plane).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-9, "{rows}x{cols}: max error {err}");
        }
    }

    #[test]
    fn impulse_energy_is_preserved() {
        let mut plane = Array2::zeros((32, 32));
        plane[[11, 5]] = 1.0;
        let pyr = dwt2(&plane, 4, &FilterBank::default()).unwrap();
        assert!((pyr.energy() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_small_plane_rejected() {
        let plane = Array2::zeros((15, 64));
        assert!(dwt2(&plane, 4, &FilterBank::default()).is_err());
        assert!(dwt2(&plane, 0, &FilterBank::default()).is_err());
    }

    #[test]
    fn mirror_pad_reflects() {
        let plane = Array2::from_shape_fn((2, 3), |(r, c)| (r * 3 + c) as f64);
        let p = mirror_pad(&plane, (4, 5));
        assert_eq!(p.row(0).to_vec(), vec![0.0, 1.0, 2.0, 2.0, 1.0]);
        assert_eq!(p.row(2).to_vec(), p.row(1).to_vec());
        assert_eq!(p.row(3).to_vec(), p.row(0).to_vec());
    }
}
