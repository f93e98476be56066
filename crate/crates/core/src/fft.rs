//! Two-dimensional FFT helpers over row-major `ndarray` planes.

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

fn transform(data: &mut Array2<Complex64>, inverse: bool) {
    let (rows, cols) = data.dim();
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(cols), planner.plan_fft_inverse(rows))
    } else {
        (planner.plan_fft_forward(cols), planner.plan_fft_forward(rows))
    };
    for mut row in data.axis_iter_mut(Axis(0)) {
        let slice = row.as_slice_mut().expect("standard layout");
        row_fft.process(slice);
    }
    let mut column = vec![Complex64::default(); rows];
    for c in 0..cols {
        for (r, slot) in column.iter_mut().enumerate() {
            *slot = data[[r, c]];
        }
        col_fft.process(&mut column);
        for (r, v) in column.iter().enumerate() {
            data[[r, c]] = *v;
        }
    }
}

/// Unnormalized forward DFT.
pub fn fft2(plane: &Array2<f64>) -> Array2<Complex64> {
    let mut data = plane.mapv(|v| Complex64::new(v, 0.0));
    if !data.is_standard_layout() {
        data = data.as_standard_layout().to_owned();
    }
    transform(&mut data, false);
    data
}

/// Inverse DFT scaled by `1 / (rows * cols)`; returns the real part.
pub fn ifft2_real(spectrum: Array2<Complex64>) -> Array2<f64> {
    let mut data = if spectrum.is_standard_layout() {
        spectrum
    } else {
        spectrum.as_standard_layout().to_owned()
    };
    transform(&mut data, true);
    let scale = 1.0 / data.len() as f64;
    data.mapv(|v| v.re * scale)
}
