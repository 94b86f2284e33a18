use crate::error::{Error, Result};
use crate::types::RfImage;

use super::RegionMask;

pub const DEFAULT_GCNR_BINS: usize = 256;

fn region_values(img: &RfImage, region: &RegionMask) -> Result<Vec<f64>> {
    if region.mask.dim() != img.values.dim() {
        return Err(Error::config(format!("region '{}' does not match the image", region.name)));
    }
    let v = region.values(&img.values);
    if v.is_empty() {
        return Err(Error::config(format!("region '{}' is empty", region.name)));
    }
    Ok(v)
}

/// `1 − Σ_k min(h_a(k), h_b(k))` for unit-sum histograms on shared bins.
/// Bins span the pooled range; a degenerate range gives 0.
pub fn gcnr_values(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::config("gCNR needs two non-empty populations"));
    }
    if bins < 2 {
        return Err(Error::config(format!("gCNR needs at least 2 bins, got {bins}")));
    }
    let (lo, hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Ok(0.0);
    }
    let width = (hi - lo) / bins as f64;
    let histogram = |values: &[f64]| {
        let mut h = vec![0.0; bins];
        let w = 1.0 / values.len() as f64;
        for &v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            h[k] += w;
        }
        h
    };
    let (ha, hb) = (histogram(a), histogram(b));
    let overlap: f64 = ha.iter().zip(&hb).map(|(x, y)| x.min(*y)).sum();
    Ok((1.0 - overlap).clamp(0.0, 1.0))
}

pub fn gcnr(envelope: &RfImage, inside: &RegionMask, outside: &RegionMask, bins: usize) -> Result<f64> {
    gcnr_values(&region_values(envelope, inside)?, &region_values(envelope, outside)?, bins)
}

/// Mean over unbiased standard deviation of a population.
pub fn snr_values(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Degenerate("SNR needs at least 2 pixels".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::Degenerate("region has zero standard deviation".into()));
    }
    Ok(mean / var.sqrt())
}

pub fn snr(envelope: &RfImage, region: &RegionMask) -> Result<f64> {
    snr_values(&region_values(envelope, region)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_disjoint() {
        let a = [0.1, 0.5, 0.9, 0.3];
        assert_eq!(gcnr_values(&a, &a, 256).unwrap(), 0.0);
        assert_eq!(gcnr_values(&[0.0, 0.1], &[0.5, 1.0], 256).unwrap(), 1.0);
        assert_eq!(gcnr_values(&[2.0; 3], &[2.0; 5], 256).unwrap(), 0.0);
        assert!(gcnr_values(&a, &a, 1).is_err());
        assert!(gcnr_values(&[], &a, 16).is_err());
    }

    #[test]
    fn snr_cases() {
        assert!(matches!(snr_values(&[3.0; 10]), Err(Error::Degenerate(_))));
        let v = [1.0, 2.0, 3.0];
        assert!((snr_values(&v).unwrap() - 2.0).abs() < 1e-15);
    }
}
