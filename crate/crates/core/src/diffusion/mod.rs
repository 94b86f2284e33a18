//! Diffusion sampling conditioned on a beamformed measurement, and the
//! median and variance images of several samples.

mod aggregate;
mod denoiser;
mod noise;
mod sampler;
mod schedule;

pub use aggregate::{median_image, variance_image};
pub use denoiser::{
    denoise, local_prior_variance, read_request_sigma, CallContext, Denoiser, DenoiserSpec, ExternalDenoiser,
    PriorSetting, PriorVariance, WienerDenoiser,
};
pub use noise::estimate_noise_std;
pub use sampler::{
    sample_many, sample_once, Estimator, SampleSet, SamplerConfig, DEFAULT_ETA, DEFAULT_ETA_B, DEFAULT_SAMPLE_COUNT,
    SIGMA_FLOOR,
};
pub use schedule::{make_schedule, NoiseSchedule, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN, DEFAULT_STEPS};
