//! Envelope detection, log compression and unit normalization.

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};
use crate::types::{BModeImage, RfImage};

pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 60.0;

/// Per-bin weights turning a spectrum into the spectrum of the analytic
/// signal: DC (and Nyquist for even lengths) kept, positive bins doubled,
/// negative bins zeroed.
pub(crate) fn analytic_weights(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n];
    if n == 0 {
        return h;
    }
    h[0] = 1.0;
    if n % 2 == 0 {
        h[n / 2] = 1.0;
        h[1..n / 2].fill(2.0);
    } else {
        h[1..=(n - 1) / 2].fill(2.0);
    }
    h
}

/// Magnitude of the discrete analytic signal of a real sequence.
pub fn envelope_1d(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward.process(&mut buf);
    for (b, h) in buf.iter_mut().zip(analytic_weights(n)) {
        *b *= h;
    }
    inverse.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.norm() * scale).collect()
}

/// Column-wise (axial) envelope of an RF image.
pub fn envelope_detect(img: &RfImage) -> Result<RfImage> {
    let (nz, nx) = img.values.dim();
    if nz < 4 {
        return Err(Error::config(format!("envelope detection needs at least 4 rows, got {nz}")));
    }
    if !img.is_finite() {
        return Err(Error::data("envelope detection input contains non-finite values"));
    }
    let columns: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|j| envelope_1d(&img.values.column(j).to_vec()))
        .collect();
    let mut out = Array2::zeros((nz, nx));
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    RfImage::new(out, img.grid.clone())
}

/// `20·log10(env / max(env))` clipped to `[-dynamic_range, 0]`.
pub fn log_compress(envelope: &RfImage, dynamic_range: f64) -> Result<BModeImage> {
    if !(dynamic_range.is_finite() && dynamic_range > 0.0) {
        return Err(Error::config(format!("dynamic range must be positive, got {dynamic_range}")));
    }
    if envelope.values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::data("log compression expects a finite non-negative envelope"));
    }
    let peak = envelope.values.iter().fold(0.0_f64, |m, v| m.max(*v));
    let values_db = if peak == 0.0 {
        Array2::from_elem(envelope.values.dim(), -dynamic_range)
    } else {
        envelope
            .values
            .mapv(|v| (20.0 * (v / peak).log10()).clamp(-dynamic_range, 0.0))
    };
    Ok(BModeImage {
        values_db,
        dynamic_range,
        grid: envelope.grid.clone(),
    })
}

/// Scales an image so that `max |value| = 1`. Zero images are returned as is.
pub fn normalize_unit(img: &RfImage) -> RfImage {
    let peak = img.max_abs();
    if peak == 0.0 || !peak.is_finite() {
        return img.clone();
    }
    RfImage {
        values: img.values.mapv(|v| v / peak),
        grid: img.grid.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ImagingGrid;
    use std::f64::consts::PI;

    fn column_image(col: Vec<f64>) -> RfImage {
        let n = col.len();
        let grid = ImagingGrid::new(vec![0.0], (0..n).map(|i| i as f64).collect()).unwrap();
        RfImage::new(Array2::from_shape_vec((n, 1), col).unwrap(), grid).unwrap()
    }

    #[test]
    fn pure_tone_has_unit_envelope() {
        let n = 64;
        let img = column_image((0..n).map(|i| (2.0 * PI * 8.0 * i as f64 / n as f64).cos()).collect());
        let env = envelope_detect(&img).unwrap();
        for v in env.values.iter() {
            assert!((v - 1.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn zero_image_has_zero_envelope() {
        let env = envelope_detect(&column_image(vec![0.0; 16])).unwrap();
        assert!(env.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_short_and_non_finite_columns() {
        assert!(matches!(envelope_detect(&column_image(vec![1.0; 3])), Err(Error::Config(_))));
        let mut col = vec![0.0; 8];
        col[2] = f64::INFINITY;
        assert!(matches!(envelope_detect(&column_image(col)), Err(Error::Data(_))));
    }

    #[test]
    fn analytic_weights_odd_and_even() {
        assert_eq!(analytic_weights(4), vec![1.0, 2.0, 1.0, 0.0]);
        assert_eq!(analytic_weights(5), vec![1.0, 2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn log_compress_reference_values() {
        let img = column_image(vec![1.0, 1e-3, 0.5, 0.0]);
        let b = log_compress(&img, 60.0).unwrap();
        assert_eq!(b.values_db[(0, 0)], 0.0);
        assert!((b.values_db[(1, 0)] + 60.0).abs() < 1e-9);
        assert!((b.values_db[(2, 0)] + 6.0206).abs() < 1e-4);
        assert_eq!(b.values_db[(3, 0)], -60.0);
        assert!(matches!(log_compress(&img, 0.0), Err(Error::Config(_))));
        let zero = log_compress(&column_image(vec![0.0; 4]), 40.0).unwrap();
        assert!(zero.values_db.iter().all(|v| *v == -40.0));
    }

    #[test]
    fn normalize_examples() {
        let img = column_image(vec![-2.0, 1.0]);
        let out = normalize_unit(&img);
        assert_eq!(out.values.as_slice().unwrap(), &[-1.0, 0.5]);
        let zero = column_image(vec![0.0; 3]);
        assert_eq!(normalize_unit(&zero), zero);
    }
}
