//! Plane-wave receive beamforming: delay-and-sum and eigenspace-based
//! minimum variance (EBMV).
//!
//! The EBMV path per pixel is
//!
//! 1. delayed samples `y` over the active aperture,
//! 2. spatially smoothed covariance `R` (subarray averaging + diagonal loading),
//! 3. MV weights `w = R⁻¹1 / (1ᵀR⁻¹1)`,
//! 4. projection onto the dominant eigenvectors of `R`,
//! 5. pixel value = mean over subarrays of `wᵀ y_l`.
//!
//! Everything is real-valued: beamforming runs on RF, not on analytic
//! signals, and the envelope is taken afterwards.

mod covariance;
mod delays;
mod image;
mod weights;

pub use covariance::{estimate_covariance, CovarianceEstimate, DelayedDataMatrix};
pub use delays::{active_aperture, compute_delays, extract_delayed, pixel_delays, Aperture};
pub use image::{beamform, das, ebmv_image, ebmv_pixel, BeamformMethod};
pub use weights::{ebmv_weights, mv_weights, signal_subspace, EigenBasis};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SUBARRAY_LENGTH: usize = 80;
pub const DEFAULT_LOADING: f64 = 0.01;
pub const DEFAULT_SUBSPACE_CRITERION: f64 = 0.05;
pub const DEFAULT_F_NUMBER: f64 = 1.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Apodization {
    None,
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamformerConfig {
    /// Subarray length `L`; `None` means 80, or `Ne` for smaller arrays.
    pub subarray_length: Option<usize>,
    /// Diagonal loading as a fraction of the mean covariance diagonal.
    pub loading: f64,
    /// Eigenvalues `>= criterion · λ_max` span the signal subspace.
    pub subspace_criterion: f64,
    /// Temporal taps `Np` per pixel.
    pub temporal_window: usize,
    pub f_number: f64,
    /// `None` picks Hann for DAS and no apodization for EBMV.
    pub apodization: Option<Apodization>,
}

impl Default for BeamformerConfig {
    fn default() -> Self {
        Self {
            subarray_length: None,
            loading: DEFAULT_LOADING,
            subspace_criterion: DEFAULT_SUBSPACE_CRITERION,
            temporal_window: 1,
            f_number: DEFAULT_F_NUMBER,
            apodization: None,
        }
    }
}

impl BeamformerConfig {
    pub fn subarray_length_for(&self, element_count: usize) -> usize {
        self.subarray_length
            .unwrap_or(if element_count >= DEFAULT_SUBARRAY_LENGTH { DEFAULT_SUBARRAY_LENGTH } else { element_count })
    }

    pub fn validate(&self, element_count: usize) -> Result<()> {
        let l = self.subarray_length_for(element_count);
        if l == 0 || l > element_count {
            return Err(Error::config(format!(
                "subarray length must satisfy 1 <= L <= Ne = {element_count}, got {l}"
            )));
        }
        if !(self.loading >= 0.0 && self.loading.is_finite()) {
            return Err(Error::config("diagonal loading must be >= 0"));
        }
        if !(self.subspace_criterion > 0.0 && self.subspace_criterion <= 1.0) {
            return Err(Error::config("subspace criterion must lie in (0, 1]"));
        }
        if self.temporal_window == 0 {
            return Err(Error::config("temporal window must be >= 1"));
        }
        if !(self.f_number > 0.0 && self.f_number.is_finite()) {
            return Err(Error::config("f-number must be positive"));
        }
        Ok(())
    }
}
