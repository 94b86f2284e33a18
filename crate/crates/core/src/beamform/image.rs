use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ChannelData, ImagingGrid, RfImage};

use super::delays::interpolate;
use super::{
    active_aperture, ebmv_weights, estimate_covariance, extract_delayed, mv_weights, pixel_delays, signal_subspace,
    Apodization, Aperture, BeamformerConfig, DelayedDataMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamformMethod {
    Das,
    Ebmv,
}

impl std::str::FromStr for BeamformMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "das" => Ok(Self::Das),
            "ebmv" => Ok(Self::Ebmv),
            other => Err(Error::config(format!("unknown beamformer '{other}' (expected das or ebmv)"))),
        }
    }
}

pub fn beamform(method: BeamformMethod, data: &ChannelData, grid: &ImagingGrid, config: &BeamformerConfig) -> Result<RfImage> {
    match method {
        BeamformMethod::Das => das(data, grid, config),
        BeamformMethod::Ebmv => ebmv_image(data, grid, config),
    }
}

/// Apodization weights over `aperture`, normalized to unit sum.
fn apodization_weights(x: f64, z: f64, aperture: Aperture, positions: &[f64], f_number: f64, kind: Apodization) -> Vec<f64> {
    let n = aperture.len();
    let mut w = match kind {
        Apodization::None => vec![1.0; n],
        Apodization::Hann => {
            let half = (z.abs() / (2.0 * f_number)).max(f64::MIN_POSITIVE);
            (aperture.first..aperture.end)
                .map(|e| {
                    let d = ((positions[e] - x) / half).clamp(-1.0, 1.0);
                    0.5 * (1.0 + (std::f64::consts::PI * d).cos())
                })
                .collect()
        }
    };
    let sum: f64 = w.iter().sum();
    if sum > 0.0 {
        w.iter_mut().for_each(|v| *v /= sum);
    } else {
        w.fill(1.0 / n as f64);
    }
    w
}

fn pixel_coordinates(grid: &ImagingGrid) -> Vec<(f64, f64)> {
    grid.z.iter().flat_map(|&z| grid.x.iter().map(move |&x| (x, z))).collect()
}

/// Delay-and-sum: `Σ_e a_e y_e` over the f-number aperture, Hann apodization
/// by default.
pub fn das(data: &ChannelData, grid: &ImagingGrid, config: &BeamformerConfig) -> Result<RfImage> {
    data.validate()?;
    config.validate(data.geometry.element_count())?;
    let kind = config.apodization.unwrap_or(Apodization::Hann);
    let geometry = &data.geometry;
    let fs = geometry.sampling_frequency;
    let values: Vec<f64> = pixel_coordinates(grid)
        .into_par_iter()
        .map(|(x, z)| {
            let delays = pixel_delays(x, z, geometry, data.transmit_angle);
            let aperture = active_aperture(x, z, geometry, config.f_number);
            let apod = apodization_weights(x, z, aperture, &geometry.element_positions, config.f_number, kind);
            (aperture.first..aperture.end)
                .zip(apod)
                .map(|(e, a)| a * interpolate(&data.samples, e, (delays[e] - data.start_time) * fs))
                .sum()
        })
        .collect();
    RfImage::new(Array2::from_shape_vec(grid.shape(), values).expect("pixel count matches grid"), grid.clone())
}

/// EBMV output for one pixel with an explicit subarray length.
fn ebmv_output(y: &DelayedDataMatrix, subarray_length: usize, loading: f64, criterion: f64) -> Result<f64> {
    let cov = estimate_covariance(y, subarray_length, loading)?;
    let w_mv = mv_weights(&cov)?;
    let basis = signal_subspace(&cov, criterion)?;
    let w = ebmv_weights(&w_mv, &basis);
    let m = y.elements() - subarray_length + 1;
    let k = y.center_tap();
    let mut acc = 0.0;
    for s in 0..m {
        for (i, wi) in w.iter().enumerate() {
            acc += wi * y.y[(s + i, k)];
        }
    }
    Ok(acc / m as f64)
}

/// EBMV pixel value: projected MV weights applied to every subarray of the
/// center tap, averaged over subarrays.
pub fn ebmv_pixel(y: &DelayedDataMatrix, config: &BeamformerConfig) -> Result<f64> {
    config.validate(y.elements())?;
    let l = config.subarray_length_for(y.elements());
    ebmv_output(y, l, config.loading, config.subspace_criterion)
}

/// Subarray length for an active aperture of `active` elements, keeping the
/// configured `L / Ne` ratio.
pub(crate) fn scaled_subarray(config: &BeamformerConfig, element_count: usize, active: usize) -> usize {
    let l = config.subarray_length_for(element_count);
    let scaled = (active as f64 * l as f64 / element_count as f64).round() as usize;
    scaled.clamp(1, active)
}

/// EBMV image. Each pixel uses the contiguous f-number aperture, with the
/// subarray length scaled to the aperture size. Pixels with an all-zero
/// covariance are set to 0.
pub fn ebmv_image(data: &ChannelData, grid: &ImagingGrid, config: &BeamformerConfig) -> Result<RfImage> {
    data.validate()?;
    let ne = data.geometry.element_count();
    config.validate(ne)?;
    let geometry = &data.geometry;
    let results: Vec<Result<Option<f64>>> = pixel_coordinates(grid)
        .into_par_iter()
        .map(|(x, z)| {
            let delays = pixel_delays(x, z, geometry, data.transmit_angle);
            let aperture = active_aperture(x, z, geometry, config.f_number);
            let full = extract_delayed(data, &delays, &aperture.mask(ne), config.temporal_window);
            let y = full.rows(aperture.first, aperture.end);
            let l = scaled_subarray(config, ne, aperture.len());
            match ebmv_output(&y, l, config.loading, config.subspace_criterion) {
                Ok(v) => Ok(Some(v)),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut degenerate = 0usize;
    let mut values = Vec::with_capacity(results.len());
    for r in results {
        match r? {
            Some(v) => values.push(v),
            None => {
                degenerate += 1;
                values.push(0.0);
            }
        }
    }
    if degenerate > 0 {
        log::debug!("ebmv: {degenerate} pixels with zero signal set to 0");
    }
    RfImage::new(Array2::from_shape_vec(grid.shape(), values).expect("pixel count matches grid"), grid.clone())
}
