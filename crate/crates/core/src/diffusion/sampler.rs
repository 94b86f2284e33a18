//! Measurement-conditioned diffusion sampling for an identity forward
//! operator (DDRM-style updates).
//!
//! Given a measurement `x = o + n`, `n ~ N(0, γ²)`, every run walks the noise
//! schedule from `σ_1` down to `σ_T`. While `σ ≥ γ` the iterate is a re-noised
//! blend of the measurement and the current estimate; once `σ < γ` it moves
//! towards the estimate along the measurement residual. The final clean
//! estimate is returned.
//!
//! Two estimators are available for the per-step clean image:
//!
//! * [`Estimator::Conditional`] (default) fuses the iterate and the
//!   measurement into one Gaussian observation using the noise covariance the
//!   update rule gives them, then denoises that. This is `E[o | x_t, x]` and
//!   keeps the sample mean equal to the posterior mean for a Gaussian prior.
//! * [`Estimator::Unconditional`] denoises `x_t` at `σ_t` directly.

use ndarray::{Array2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::types::RfImage;

use super::denoiser::{CallContext, Denoiser};
use super::NoiseSchedule;

pub const DEFAULT_SAMPLE_COUNT: usize = 10;
pub const DEFAULT_ETA: f64 = 0.85;
pub const DEFAULT_ETA_B: f64 = 1.0;
/// Replaces `γ` in the residual scaling when the measurement is noiseless.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Conditional,
    Unconditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub sample_count: usize,
    pub schedule: NoiseSchedule,
    /// Standard deviation `γ` of the additive measurement noise.
    pub measurement_noise: f64,
    pub eta: f64,
    pub eta_b: f64,
    pub base_seed: u64,
    pub estimator: Estimator,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            sample_count: DEFAULT_SAMPLE_COUNT,
            schedule: NoiseSchedule::default(),
            measurement_noise: 0.0,
            eta: DEFAULT_ETA,
            eta_b: DEFAULT_ETA_B,
            base_seed: 0,
            estimator: Estimator::Conditional,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.measurement_noise >= 0.0 && self.measurement_noise.is_finite()) {
            return Err(Error::config(format!(
                "measurement noise must be finite and >= 0, got {}",
                self.measurement_noise
            )));
        }
        for (name, v) in [("eta", self.eta), ("eta_b", self.eta_b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.sample_count == 0 {
            return Err(Error::config("sample count must be >= 1"));
        }
        Ok(())
    }
}

/// `C` samples with the indices they were drawn with.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<RfImage>,
    pub sample_indices: Vec<usize>,
    pub config: SamplerConfig,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Noise state of the iterate relative to the clean image: `x_t − o` has
/// variance `var` and covariance `cov` with the measurement noise.
#[derive(Debug, Clone, Copy)]
struct NoiseState {
    var: f64,
    cov: f64,
}

fn draw(shape: (usize, usize), seed: u64, sample_index: usize, step: usize) -> Array2<f64> {
    let mut buf = vec![0.0; shape.0 * shape.1];
    rng::fill_standard_normal(seed, Domain::Sampler, rng::stream_id(sample_index as u64, step as u64), &mut buf);
    Array2::from_shape_vec(shape, buf).expect("buffer sized to shape")
}

/// Best linear combination of two noisy views of the same image and the
/// variance of its noise.
fn fuse(x_t: &Array2<f64>, measurement: &Array2<f64>, state: NoiseState, gamma: f64) -> (Array2<f64>, f64) {
    let g2 = gamma * gamma;
    let denom = state.var + g2 - 2.0 * state.cov;
    if denom <= 1e-12 * (state.var + g2) {
        return (measurement.clone(), g2);
    }
    let w_iterate = (g2 - state.cov) / denom;
    let w_meas = (state.var - state.cov) / denom;
    let var = ((state.var * g2 - state.cov * state.cov) / denom).max(0.0);
    let mut fused = Array2::zeros(x_t.dim());
    Zip::from(&mut fused)
        .and(x_t)
        .and(measurement)
        .for_each(|f, &a, &b| *f = w_iterate * a + w_meas * b);
    (fused, var)
}

fn check_finite(a: &Array2<f64>, sample_index: usize, step: usize, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("sample {sample_index}: non-finite {what} at step {step}")))
    }
}

/// One conditional sampling run; deterministic in `(base_seed, sample_index)`.
pub fn sample_once(x: &RfImage, denoiser: &dyn Denoiser, config: &SamplerConfig, sample_index: usize) -> Result<RfImage> {
    config.validate()?;
    if !x.is_finite() {
        return Err(Error::data("measurement contains non-finite values"));
    }
    if x.max_abs() > 1.0 + 1e-6 {
        return Err(Error::config(format!(
            "measurement must be normalized to [-1, 1] (max |x| = {})",
            x.max_abs()
        )));
    }
    let meas = &x.values;
    let shape = meas.dim();
    let sigmas = config.schedule.sigmas();
    let gamma = config.measurement_noise;
    let g2 = gamma * gamma;
    let (eta, eta_b) = (config.eta, config.eta_b);
    let seed = config.base_seed;

    let (mut x_t, mut state) = if sigmas[0] > gamma {
        let scale = (sigmas[0] * sigmas[0] - g2).max(0.0).sqrt();
        let eps = draw(shape, seed, sample_index, 0);
        (meas + &(eps * scale), NoiseState { var: sigmas[0] * sigmas[0], cov: g2 })
    } else {
        (meas.clone(), NoiseState { var: g2, cov: g2 })
    };

    let steps = sigmas.len();
    for t in 0..steps {
        let ctx = CallContext { sample_index, step: t };
        let x0 = match config.estimator {
            Estimator::Unconditional => denoiser.denoise(&x_t, sigmas[t], ctx)?,
            Estimator::Conditional => {
                if gamma == 0.0 {
                    meas.clone()
                } else {
                    let (fused, var) = fuse(&x_t, meas, state, gamma);
                    if var > 0.0 {
                        denoiser.denoise(&fused, var.sqrt(), ctx)?
                    } else {
                        fused
                    }
                }
            }
        };
        check_finite(&x0, sample_index, t, "estimate")?;
        if x0.dim() != shape {
            return Err(Error::Denoiser {
                sample: sample_index,
                reason: format!("denoiser returned shape {:?}, expected {:?}", x0.dim(), shape),
            });
        }
        if t + 1 == steps {
            return RfImage::new(x0, x.grid.clone());
        }

        let next = sigmas[t + 1];
        let eps = draw(shape, seed, sample_index, t + 1);
        let mut updated = Array2::zeros(shape);
        if next >= gamma {
            let scale = (next * next - eta_b * eta_b * g2).max(0.0).sqrt();
            Zip::from(&mut updated)
                .and(&x0)
                .and(meas)
                .and(&eps)
                .for_each(|u, &x0, &y, &e| *u = (1.0 - eta_b) * x0 + eta_b * y + scale * e);
            state = NoiseState { var: next * next, cov: eta_b * g2 };
        } else {
            let pull = (1.0 - eta * eta).sqrt() * next / gamma.max(SIGMA_FLOOR);
            Zip::from(&mut updated)
                .and(&x0)
                .and(meas)
                .and(&eps)
                .for_each(|u, &x0, &y, &e| *u = x0 + pull * (y - x0) + eta * next * e);
            state = NoiseState {
                var: next * next,
                cov: (1.0 - eta * eta).sqrt() * next * gamma,
            };
        }
        check_finite(&updated, sample_index, t + 1, "iterate")?;
        x_t = updated;
    }
    unreachable!("schedule has at least one step")
}

/// `C` independent runs with sample indices `1..=C`, executed in parallel.
pub fn sample_many(x: &RfImage, denoiser: &dyn Denoiser, config: &SamplerConfig) -> Result<SampleSet> {
    config.validate()?;
    if config.sample_count < 2 {
        return Err(Error::config("at least 2 samples are needed"));
    }
    let indices: Vec<usize> = (1..=config.sample_count).collect();
    let samples = indices
        .par_iter()
        .map(|&i| sample_once(x, denoiser, config, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet {
        samples,
        sample_indices: indices,
        config: config.clone(),
    })
}
