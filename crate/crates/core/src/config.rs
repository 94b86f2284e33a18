//! Run configuration (TOML) with one section per pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamform::{Apodization, BeamformMethod, BeamformerConfig, DEFAULT_F_NUMBER, DEFAULT_LOADING, DEFAULT_SUBSPACE_CRITERION};
use crate::diffusion::{
    make_schedule, DenoiserSpec, Estimator, SamplerConfig, DEFAULT_ETA, DEFAULT_ETA_B, DEFAULT_SAMPLE_COUNT,
    DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN, DEFAULT_STEPS,
};
use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::phantom::PhantomSpec;
use crate::simulate::DEFAULT_FRACTIONAL_BANDWIDTH;
use crate::types::{ImagingGrid, ProbeGeometry, DEFAULT_SOUND_SPEED};

/// Config of the bundled `ec-demo` run.
pub const EC_DEMO: &str = include_str!("../configs/ec-demo.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub elements: usize,
    pub pitch: f64,
    pub center_frequency: f64,
    pub sampling_frequency: f64,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
}

fn default_sound_speed() -> f64 {
    DEFAULT_SOUND_SPEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSection {
    /// Plane-wave steering angle in radians.
    pub transmit_angle: f64,
    pub noise_std: f64,
    pub fractional_bandwidth: f64,
    pub start_time: f64,
    /// Samples per channel; computed from the grid when absent.
    pub sample_count: Option<usize>,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        Self {
            transmit_angle: 0.0,
            noise_std: 0.0,
            fractional_bandwidth: DEFAULT_FRACTIONAL_BANDWIDTH,
            start_time: 0.0,
            sample_count: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub dz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamformSection {
    pub method: BeamformMethod,
    /// Scale the beamformed image to `max |x| = 1`; full runs always do.
    pub normalize: bool,
    pub subarray_length: Option<usize>,
    pub loading: f64,
    pub subspace_criterion: f64,
    pub temporal_window: usize,
    pub f_number: f64,
    pub apodization: Option<Apodization>,
}

impl Default for BeamformSection {
    fn default() -> Self {
        Self {
            method: BeamformMethod::Ebmv,
            normalize: false,
            subarray_length: None,
            loading: DEFAULT_LOADING,
            subspace_criterion: DEFAULT_SUBSPACE_CRITERION,
            temporal_window: 1,
            f_number: DEFAULT_F_NUMBER,
            apodization: None,
        }
    }
}

impl BeamformSection {
    pub fn beamformer(&self) -> BeamformerConfig {
        BeamformerConfig {
            subarray_length: self.subarray_length,
            loading: self.loading,
            subspace_criterion: self.subspace_criterion,
            temporal_window: self.temporal_window,
            f_number: self.f_number,
            apodization: self.apodization,
        }
    }
}

/// A number, or `"auto"` to estimate it from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSetting {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub samples: usize,
    pub steps: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub measurement_noise: NoiseSetting,
    pub eta: f64,
    pub eta_b: f64,
    pub estimator: Estimator,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLE_COUNT,
            steps: DEFAULT_STEPS,
            sigma_max: DEFAULT_SIGMA_MAX,
            sigma_min: DEFAULT_SIGMA_MIN,
            measurement_noise: NoiseSetting::Named("auto".into()),
            eta: DEFAULT_ETA,
            eta_b: DEFAULT_ETA_B,
            estimator: Estimator::Conditional,
        }
    }
}

impl SamplerSection {
    /// Whether γ is to be estimated from the measurement.
    pub fn auto_noise(&self) -> Result<bool> {
        match &self.measurement_noise {
            NoiseSetting::Value(_) => Ok(false),
            NoiseSetting::Named(s) if s == "auto" => Ok(true),
            NoiseSetting::Named(s) => Err(Error::config(format!("measurement_noise must be a number or \"auto\", got '{s}'"))),
        }
    }

    /// Sampler settings for a measurement with noise level `gamma`.
    pub fn sampler(&self, gamma: f64, base_seed: u64) -> Result<SamplerConfig> {
        let cfg = SamplerConfig {
            sample_count: self.samples,
            schedule: make_schedule(self.steps, self.sigma_max, self.sigma_min)?,
            measurement_noise: gamma,
            eta: self.eta,
            eta_b: self.eta_b,
            base_seed,
            estimator: self.estimator,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::config(format!("variance imaging needs at least 2 samples, got {}", self.samples)));
        }
        let gamma = match self.measurement_noise {
            NoiseSetting::Value(v) => v,
            _ => {
                self.auto_noise()?;
                0.0
            }
        };
        self.sampler(gamma, 0).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Not part of the run identity, so it is left out of the canonical form.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    pub probe: ProbeSection,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    pub grid: GridSection,
    #[serde(default)]
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub beamform: BeamformSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub denoiser: DenoiserSpec,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Parses and validates a config. `base` resolves relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn ec_demo() -> Self {
        Self::parse(EC_DEMO, Path::new(".")).expect("bundled config is valid")
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let DenoiserSpec::External { executable, work_dir } = &mut self.denoiser {
            if executable.components().count() > 1 && executable.is_relative() {
                *executable = base.join(&*executable);
            }
            if work_dir.is_relative() {
                *work_dir = base.join(&*work_dir);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let geometry = self.geometry()?;
        let grid = self.grid()?;
        self.beamform.beamformer().validate(geometry.element_count())?;
        self.sampler.validate()?;
        if !(self.acquisition.noise_std >= 0.0 && self.acquisition.noise_std.is_finite()) {
            return Err(Error::config("acquisition noise_std must be >= 0"));
        }
        if self.acquisition.transmit_angle.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::config("transmit angle must lie in (-pi/2, pi/2)"));
        }
        crate::phantom::make_phantom(&self.phantom, &grid)?;
        if let DenoiserSpec::External { executable, .. } = &self.denoiser {
            if executable.components().count() > 1 && !executable.exists() {
                return Err(Error::config(format!("denoiser executable {} does not exist", executable.display())));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ProbeGeometry> {
        let p = &self.probe;
        ProbeGeometry::linear(p.elements, p.pitch, p.center_frequency, p.sampling_frequency, p.sound_speed)
    }

    pub fn grid(&self) -> Result<ImagingGrid> {
        let g = &self.grid;
        ImagingGrid::from_bounds(g.x_min, g.x_max, g.dx, g.z_min, g.z_max, g.dz)
    }

    /// Canonical TOML form; its hash identifies the run.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
