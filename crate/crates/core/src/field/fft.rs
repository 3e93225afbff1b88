//! Thin rustfft wrappers over ndarray storage. Transforms are unscaled in
//! both directions; callers apply the 1/N normalization that makes forward
//! coefficients mode amplitudes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Dir {
    Forward,
    Inverse,
}

fn plan(n: usize, dir: Dir) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, Dir), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().expect("fft plan cache poisoned");
    cache
        .entry((n, dir))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            match dir {
                Dir::Forward => planner.plan_fft_forward(n),
                Dir::Inverse => planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

/// In-place transform of every row. Rows are contiguous in ndarray's default
/// layout, so this is the cheap axis.
pub(crate) fn fft_rows(data: &mut Array2<Complex64>, dir: Dir) {
    let (_, cols) = data.dim();
    let fft = plan(cols, dir);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for mut row in data.rows_mut() {
        let slice = row.as_slice_mut().expect("row-major layout");
        fft.process_with_scratch(slice, &mut scratch);
    }
}

/// In-place 2D transform: rows, then columns via transpose.
pub(crate) fn fft2(data: &mut Array2<Complex64>, dir: Dir) {
    fft_rows(data, dir);
    let mut t = data.t().as_standard_layout().into_owned();
    fft_rows(&mut t, dir);
    *data = t.t().as_standard_layout().into_owned();
}

/// Half-cell phase e^(-i pi k(j) / n) for FFT slot j. Samples live at cell
/// centers, so composing the raw DFT with this phase makes coefficients true
/// amplitudes of exp(i 2 pi k x / L), independent of the grid.
pub(crate) fn center_phase(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| {
            let k = crate::field::SpectralField::mode_index(j, n);
            Complex64::from_polar(1.0, -std::f64::consts::PI * k as f64 / n as f64)
        })
        .collect()
}

/// Multiplies column slot j of every row by phase[j].
pub(crate) fn scale_cols(data: &mut Array2<Complex64>, phase: &[Complex64]) {
    for mut row in data.rows_mut() {
        for (z, p) in row.iter_mut().zip(phase) {
            *z *= p;
        }
    }
}

/// Multiplies row slot j by phase[j].
pub(crate) fn scale_rows(data: &mut Array2<Complex64>, phase: &[Complex64]) {
    for (mut row, p) in data.rows_mut().into_iter().zip(phase) {
        for z in row.iter_mut() {
            *z *= *p;
        }
    }
}
