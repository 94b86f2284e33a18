use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::RfImage;

use super::SampleSet;

fn check_shapes(set: &SampleSet) -> Result<(usize, usize)> {
    let first = set.samples.first().ok_or_else(|| Error::config("sample set is empty"))?;
    let shape = first.values.dim();
    if set.samples.iter().any(|s| s.values.dim() != shape) {
        return Err(Error::data("samples have different shapes"));
    }
    Ok(shape)
}

/// Pixel-wise unbiased sample variance (divisor `C − 1`).
///
/// Deviations are taken from the first sample, so identical samples give
/// exactly zero.
pub fn variance_image(set: &SampleSet) -> Result<RfImage> {
    let c = set.samples.len();
    if c < 2 {
        return Err(Error::config(format!("variance needs at least 2 samples, got {c}")));
    }
    let shape = check_shapes(set)?;
    let first = &set.samples[0].values;
    let mut sum = Array2::<f64>::zeros(shape);
    let mut sum_sq = Array2::<f64>::zeros(shape);
    for s in &set.samples[1..] {
        let d = &s.values - first;
        sum += &d;
        sum_sq.zip_mut_with(&d, |a, d| *a += d * d);
    }
    let n = c as f64;
    let var = ndarray::Zip::from(&sum_sq)
        .and(&sum)
        .map_collect(|&q, &s| ((q - s * s / n) / (n - 1.0)).max(0.0));
    RfImage::new(var, set.samples[0].grid.clone())
}

/// Pixel-wise median; even counts average the two middle values.
pub fn median_image(set: &SampleSet) -> Result<RfImage> {
    let shape = check_shapes(set)?;
    let c = set.samples.len();
    let mut buf = vec![0.0; c];
    let out = Array2::from_shape_fn(shape, |idx| {
        for (b, s) in buf.iter_mut().zip(&set.samples) {
            *b = s.values[idx];
        }
        buf.sort_by(f64::total_cmp);
        if c % 2 == 1 {
            buf[c / 2]
        } else {
            0.5 * (buf[c / 2 - 1] + buf[c / 2])
        }
    });
    RfImage::new(out, set.samples[0].grid.clone())
}
