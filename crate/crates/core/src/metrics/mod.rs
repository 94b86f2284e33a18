//! Image quality metrics: FWHM of a point target, gCNR between two regions,
//! and background SNR. All metrics expect linear-scale envelopes.

mod contrast;
mod fwhm;
mod region;
mod report;

pub use contrast::{gcnr, gcnr_values, snr, snr_values, DEFAULT_GCNR_BINS};
pub use fwhm::{fwhm, profile_fwhm, Axis};
pub use region::{RegionMask, RegionShape};
pub use report::{evaluate, GcnrDomain, MetricReport, MetricValue, MetricsConfig, NamedRegion, RegionInfo};
