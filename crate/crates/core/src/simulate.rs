//! Point-scatterer plane-wave channel data simulator.
//!
//! Each scatterer contributes `a_k · pulse(t − τ_tx − τ_rx)` to every element,
//! with `τ_tx = (z cosθ + x sinθ)/c` and `τ_rx = |element − scatterer|/c`.
//! No directivity, attenuation or impulse-response modeling.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::{Phantom, TissueReflectivity};
use crate::rng::{self, Domain};
use crate::types::{ChannelData, ImagingGrid, ProbeGeometry};

/// Scatterer positions `(lateral, axial)` in meters and signed amplitudes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScattererCloud {
    pub positions: Vec<(f64, f64)>,
    pub amplitudes: Vec<f64>,
}

impl ScattererCloud {
    pub fn push(&mut self, x: f64, z: f64, amplitude: f64) {
        self.positions.push((x, z));
        self.amplitudes.push(amplitude);
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// One scatterer per non-zero reflectivity pixel, plus the phantom's point
    /// targets.
    pub fn from_phantom(phantom: &Phantom, reflectivity: &TissueReflectivity) -> Self {
        let mut cloud = Self::default();
        let grid = &reflectivity.grid;
        for (i, &z) in grid.z.iter().enumerate() {
            for (j, &x) in grid.x.iter().enumerate() {
                let a = reflectivity.o[(i, j)];
                if a != 0.0 {
                    cloud.push(x, z, a);
                }
            }
        }
        for p in &phantom.points {
            cloud.push(p.x, p.z, p.amplitude);
        }
        cloud
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            positions: self.positions.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }
}

pub const DEFAULT_FRACTIONAL_BANDWIDTH: f64 = 0.6;

/// Gaussian-windowed sinusoid at the probe center frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub center_frequency: f64,
    /// −6 dB fractional bandwidth.
    pub fractional_bandwidth: f64,
}

impl Pulse {
    pub fn new(center_frequency: f64, fractional_bandwidth: f64) -> Result<Self> {
        if !(center_frequency > 0.0) || !(fractional_bandwidth > 0.0 && fractional_bandwidth.is_finite()) {
            return Err(Error::config("pulse needs positive center frequency and bandwidth"));
        }
        Ok(Self {
            center_frequency,
            fractional_bandwidth,
        })
    }

    /// Standard deviation of the Gaussian envelope in seconds.
    pub fn envelope_std(&self) -> f64 {
        (2.0 * std::f64::consts::LN_2).sqrt() / (std::f64::consts::PI * self.fractional_bandwidth * self.center_frequency)
    }

    /// Time beyond which the envelope is below 1e-4 and the pulse is truncated.
    pub fn half_width(&self) -> f64 {
        self.envelope_std() * (2.0 * 1e4_f64.ln()).sqrt()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t.abs() > self.half_width() {
            return 0.0;
        }
        let s = self.envelope_std();
        (-0.5 * (t / s).powi(2)).exp() * (2.0 * std::f64::consts::PI * self.center_frequency * t).cos()
    }
}

/// Transmit and receive settings of one plane-wave shot.
#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub transmit_angle: f64,
    pub pulse: Pulse,
    /// Standard deviation of additive white noise per sample.
    pub noise_std: f64,
    pub seed: u64,
    pub start_time: f64,
    pub sample_count: usize,
}

/// Transmit delay of a plane wave at angle `angle` reaching `(x, z)`.
pub fn transmit_delay(x: f64, z: f64, angle: f64, c: f64) -> f64 {
    (z * angle.cos() + x * angle.sin()) / c
}

/// Receive delay from `(x, z)` back to an element at lateral position `xe`.
pub fn receive_delay(x: f64, z: f64, xe: f64, c: f64) -> f64 {
    ((x - xe).powi(2) + z * z).sqrt() / c
}

/// Number of samples needed to record echoes from every pixel of `grid`.
pub fn samples_to_cover(grid: &ImagingGrid, geometry: &ProbeGeometry, angle: f64, pulse: &Pulse, start_time: f64) -> usize {
    let c = geometry.sound_speed;
    let mut latest: f64 = 0.0;
    for &x in [grid.x[0], grid.x[grid.nx() - 1]].iter() {
        for &z in [grid.z[0], grid.z[grid.nz() - 1]].iter() {
            for &xe in [geometry.element_positions[0], *geometry.element_positions.last().unwrap()].iter() {
                latest = latest.max(transmit_delay(x, z, angle, c) + receive_delay(x, z, xe, c));
            }
        }
    }
    let span = latest + pulse.half_width() - start_time;
    (span * geometry.sampling_frequency).ceil().max(1.0) as usize + 1
}

/// Simulates the element signals of one plane-wave transmission.
pub fn simulate_channel_data(cloud: &ScattererCloud, geometry: &ProbeGeometry, acq: &Acquisition) -> Result<ChannelData> {
    geometry.validate()?;
    if !(acq.noise_std >= 0.0 && acq.noise_std.is_finite()) {
        return Err(Error::config(format!("noise std must be >= 0, got {}", acq.noise_std)));
    }
    if !(acq.transmit_angle.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::config("transmit angle must satisfy |θ| < π/2"));
    }
    if acq.sample_count == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    if cloud.positions.len() != cloud.amplitudes.len() {
        return Err(Error::data("scatterer positions and amplitudes differ in length"));
    }
    let nt = acq.sample_count;
    let fs = geometry.sampling_frequency;
    let c = geometry.sound_speed;
    let half = acq.pulse.half_width();

    // Column per element; each column is summed over scatterers in a fixed
    // order so the result does not depend on the thread count.
    let columns: Vec<Vec<f64>> = geometry
        .element_positions
        .par_iter()
        .enumerate()
        .map(|(e, &xe)| {
            let mut col = vec![0.0; nt];
            for (&(x, z), &a) in cloud.positions.iter().zip(&cloud.amplitudes) {
                if a == 0.0 {
                    continue;
                }
                let tau = transmit_delay(x, z, acq.transmit_angle, c) + receive_delay(x, z, xe, c);
                let first = (((tau - half - acq.start_time) * fs).ceil()).max(0.0) as usize;
                let last = (((tau + half - acq.start_time) * fs).floor()).min(nt as f64 - 1.0);
                if last < 0.0 {
                    continue;
                }
                for n in first..=last as usize {
                    let t = acq.start_time + n as f64 / fs;
                    col[n] += a * acq.pulse.eval(t - tau);
                }
            }
            if acq.noise_std > 0.0 {
                let mut noise = vec![0.0; nt];
                rng::fill_standard_normal(acq.seed, Domain::ChannelNoise, e as u64, &mut noise);
                for (v, n) in col.iter_mut().zip(noise) {
                    *v += acq.noise_std * n;
                }
            }
            col
        })
        .collect();

    let ne = geometry.element_count();
    let mut samples = Array2::zeros((nt, ne));
    for (e, col) in columns.into_iter().enumerate() {
        for (n, v) in col.into_iter().enumerate() {
            samples[(n, e)] = v;
        }
    }
    ChannelData::new(samples, acq.transmit_angle, acq.start_time, geometry.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> ProbeGeometry {
        ProbeGeometry::linear(16, 3e-4, 5e6, 40e6, 1540.0).unwrap()
    }

    fn acq(noise_std: f64) -> Acquisition {
        Acquisition {
            transmit_angle: 0.0,
            pulse: Pulse::new(5e6, 0.6).unwrap(),
            noise_std,
            seed: 3,
            start_time: 0.0,
            sample_count: 1200,
        }
    }

    #[test]
    fn empty_cloud_without_noise_is_silent() {
        let data = simulate_channel_data(&ScattererCloud::default(), &probe(), &acq(0.0)).unwrap();
        assert!(data.samples.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_cloud_with_noise_is_reproducible() {
        let a = simulate_channel_data(&ScattererCloud::default(), &probe(), &acq(0.1)).unwrap();
        let b = simulate_channel_data(&ScattererCloud::default(), &probe(), &acq(0.1)).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn negative_noise_is_a_config_error() {
        let err = simulate_channel_data(&ScattererCloud::default(), &probe(), &acq(-1.0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn pulse_peaks_at_zero_and_is_truncated() {
        let p = Pulse::new(5e6, 0.6).unwrap();
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(p.half_width() * 1.01), 0.0);
    }

    #[test]
    fn pulse_spectrum_half_amplitude_at_band_edges() {
        // Gaussian envelope spectrum exp(-2π²s²f²) must fall to 0.5 at ±B·f0/2.
        let p = Pulse::new(5e6, 0.6).unwrap();
        let s = p.envelope_std();
        let f = 0.5 * 0.6 * 5e6;
        let mag = (-2.0 * std::f64::consts::PI.powi(2) * s * s * f * f).exp();
        assert!((mag - 0.5).abs() < 1e-12);
    }
}
