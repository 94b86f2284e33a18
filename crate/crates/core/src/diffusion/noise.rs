use ndarray::Array2;

use crate::error::{Error, Result};

/// Heuristic white-noise std: median absolute value of the 2×2 Haar
/// diagonal detail band divided by 0.6745.
pub fn estimate_noise_std(img: &Array2<f64>) -> Result<f64> {
    let (rows, cols) = img.dim();
    if rows < 2 || cols < 2 {
        return Err(Error::config("noise estimation needs an image of at least 2×2"));
    }
    let mut detail: Vec<f64> = Vec::with_capacity((rows / 2) * (cols / 2));
    for i in (0..rows - 1).step_by(2) {
        for j in (0..cols - 1).step_by(2) {
            let d = 0.5 * (img[(i, j)] - img[(i, j + 1)] - img[(i + 1, j)] + img[(i + 1, j + 1)]);
            detail.push(d.abs());
        }
    }
    detail.sort_by(f64::total_cmp);
    let n = detail.len();
    let median = if n % 2 == 1 { detail[n / 2] } else { 0.5 * (detail[n / 2 - 1] + detail[n / 2]) };
    Ok(median / 0.6745)
}
