use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RfImage;

use super::RegionMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Axial,
    Lateral,
}

/// Peak height of a 3-point parabola through `(−1, a)`, `(0, b)`, `(1, c)`.
fn parabolic_peak(a: f64, b: f64, c: f64) -> f64 {
    let curvature = a - 2.0 * b + c;
    if curvature >= 0.0 {
        return b;
    }
    let offset = 0.5 * (a - c) / curvature;
    b - 0.25 * (a - c) * offset
}

/// Width of a 1-D profile at half of its peak `profile[peak]`, in samples.
pub fn profile_fwhm(profile: &[f64], peak: usize) -> Result<f64> {
    let n = profile.len();
    if n < 3 || peak == 0 || peak + 1 >= n {
        return Err(Error::NoPeak("peak on the profile boundary".into()));
    }
    let (a, b, c) = (profile[peak - 1], profile[peak], profile[peak + 1]);
    let is_peak = b >= a && b >= c && (b > a || b > c);
    if !is_peak {
        return Err(Error::NoPeak("profile has no local maximum at the peak".into()));
    }
    if !(b > 0.0) {
        return Err(Error::NoPeak("peak amplitude is not positive".into()));
    }
    let half = 0.5 * parabolic_peak(a, b, c);

    let left = (0..peak)
        .rev()
        .find(|&i| profile[i] < half)
        .map(|i| i as f64 + (half - profile[i]) / (profile[i + 1] - profile[i]))
        .ok_or_else(|| Error::NoPeak("no half-maximum crossing before the peak".into()))?;
    let right = (peak + 1..n)
        .find(|&i| profile[i] < half)
        .map(|i| i as f64 - (half - profile[i]) / (profile[i - 1] - profile[i]))
        .ok_or_else(|| Error::NoPeak("no half-maximum crossing after the peak".into()))?;
    Ok(right - left)
}

/// Full width at half maximum, in meters, of the envelope profile through the
/// largest pixel of `region` along `axis`.
pub fn fwhm(envelope: &RfImage, region: &RegionMask, axis: Axis) -> Result<f64> {
    if region.mask.dim() != envelope.values.dim() {
        return Err(Error::config("region mask does not match the image"));
    }
    let (row, col) = envelope
        .values
        .indexed_iter()
        .filter(|(idx, _)| region.mask[*idx])
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(idx, _)| idx)
        .ok_or_else(|| Error::config(format!("region '{}' is empty", region.name)))?;
    let (profile, peak, spacing) = match axis {
        Axis::Axial => (envelope.values.column(col).to_vec(), row, envelope.grid.dz()),
        Axis::Lateral => (envelope.values.row(row).to_vec(), col, envelope.grid.dx()),
    };
    Ok(profile_fwhm(&profile, peak)? * spacing)
}
