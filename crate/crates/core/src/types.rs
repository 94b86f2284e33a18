//! Shared signal and image containers.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SOUND_SPEED: f64 = 1540.0;

/// Linear array geometry and acquisition frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGeometry {
    /// Lateral element positions in meters, strictly increasing.
    pub element_positions: Vec<f64>,
    pub center_frequency: f64,
    pub sampling_frequency: f64,
    pub sound_speed: f64,
}

impl ProbeGeometry {
    pub fn new(
        element_positions: Vec<f64>,
        center_frequency: f64,
        sampling_frequency: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        let geometry = Self {
            element_positions,
            center_frequency,
            sampling_frequency,
            sound_speed,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Uniform linear array of `count` elements centered on x = 0.
    pub fn linear(
        count: usize,
        pitch: f64,
        center_frequency: f64,
        sampling_frequency: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        let half = (count as f64 - 1.0) / 2.0;
        let positions = (0..count).map(|e| (e as f64 - half) * pitch).collect();
        Self::new(positions, center_frequency, sampling_frequency, sound_speed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.element_positions.len() < 2 {
            return Err(Error::config("probe needs at least 2 elements"));
        }
        if !self.element_positions.iter().all(|x| x.is_finite())
            || self.element_positions.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::config(
                "element positions must be finite and strictly increasing",
            ));
        }
        for (name, v) in [
            ("center_frequency", self.center_frequency),
            ("sampling_frequency", self.sampling_frequency),
            ("sound_speed", self.sound_speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.element_positions.len()
    }

    pub fn wavelength(&self) -> f64 {
        self.sound_speed / self.center_frequency
    }
}

/// Rectilinear pixel grid. Rows are axial (z), columns lateral (x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagingGrid {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::config(format!("{name} axis is empty")));
    }
    if !axis.iter().all(|v| v.is_finite()) {
        return Err(Error::config(format!("{name} axis has non-finite entries")));
    }
    if axis.len() >= 2 {
        let step = axis[1] - axis[0];
        if step <= 0.0 {
            return Err(Error::config(format!("{name} axis must be increasing")));
        }
        let tol = 1e-6 * step;
        for w in axis.windows(2) {
            if ((w[1] - w[0]) - step).abs() > tol {
                return Err(Error::config(format!("{name} axis must be uniform")));
            }
        }
    }
    Ok(())
}

impl ImagingGrid {
    pub fn new(x: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        check_axis("lateral", &x)?;
        check_axis("axial", &z)?;
        Ok(Self { x, z })
    }

    /// Grid from inclusive bounds and spacings; the upper bound is reached to
    /// within half a step.
    pub fn from_bounds(x_min: f64, x_max: f64, dx: f64, z_min: f64, z_max: f64, dz: f64) -> Result<Self> {
        Self::new(axis(x_min, x_max, dx)?, axis(z_min, z_max, dz)?)
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nz(&self) -> usize {
        self.z.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nz(), self.nx())
    }

    /// Lateral spacing (1.0 for a single column).
    pub fn dx(&self) -> f64 {
        if self.x.len() > 1 { self.x[1] - self.x[0] } else { 1.0 }
    }

    pub fn dz(&self) -> f64 {
        if self.z.len() > 1 { self.z[1] - self.z[0] } else { 1.0 }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        let (x0, x1) = (self.x[0], self.x[self.nx() - 1]);
        let (z0, z1) = (self.z[0], self.z[self.nz() - 1]);
        x >= x0 - 0.5 * self.dx() && x <= x1 + 0.5 * self.dx() && z >= z0 - 0.5 * self.dz() && z <= z1 + 0.5 * self.dz()
    }

    /// Nearest pixel (row, col) to a point, clamped to the grid.
    pub fn nearest(&self, x: f64, z: f64) -> (usize, usize) {
        let col = ((x - self.x[0]) / self.dx()).round().clamp(0.0, (self.nx() - 1) as f64) as usize;
        let row = ((z - self.z[0]) / self.dz()).round().clamp(0.0, (self.nz() - 1) as f64) as usize;
        (row, col)
    }

    /// The same grid with both axes multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x: self.x.iter().map(|v| v * factor).collect(),
            z: self.z.iter().map(|v| v * factor).collect(),
        }
    }
}

fn axis(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) {
        return Err(Error::config(format!("invalid axis [{min}, {max}] step {step}")));
    }
    let n = ((max - min) / step + 0.5).floor() as usize + 1;
    Ok((0..n).map(|i| min + i as f64 * step).collect())
}

/// Raw element signals, `[Nt × Ne]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelData {
    pub samples: Array2<f64>,
    pub transmit_angle: f64,
    /// Time of the first sample in seconds.
    pub start_time: f64,
    pub geometry: ProbeGeometry,
}

impl ChannelData {
    pub fn new(samples: Array2<f64>, transmit_angle: f64, start_time: f64, geometry: ProbeGeometry) -> Result<Self> {
        let data = Self {
            samples,
            transmit_angle,
            start_time,
            geometry,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.samples.nrows() == 0 {
            return Err(Error::data("channel data has no time samples"));
        }
        if self.samples.ncols() != self.geometry.element_count() {
            return Err(Error::data(format!(
                "channel data has {} columns but the probe has {} elements",
                self.samples.ncols(),
                self.geometry.element_count()
            )));
        }
        if !self.samples.iter().all(|v| v.is_finite()) {
            return Err(Error::data("channel data contains non-finite samples"));
        }
        if !(self.transmit_angle.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::config("transmit angle must satisfy |θ| < π/2"));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        self.samples.nrows()
    }
}

/// Signed beamformed RF image (or any real image on a grid), `[Nz × Nx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfImage {
    pub values: Array2<f64>,
    pub grid: ImagingGrid,
}

impl RfImage {
    pub fn new(values: Array2<f64>, grid: ImagingGrid) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::data(format!(
                "image shape {:?} does not match grid {:?}",
                values.dim(),
                grid.shape()
            )));
        }
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: &ImagingGrid) -> Self {
        Self {
            values: Array2::zeros(grid.shape()),
            grid: grid.clone(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Log-compressed image in dB, values in `[-dynamic_range, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BModeImage {
    pub values_db: Array2<f64>,
    pub dynamic_range: f64,
    pub grid: ImagingGrid,
}
