//! Plane-wave ultrasound imaging: a speckle phantom model and channel data
//! simulator, DAS and eigenspace-based minimum variance beamforming,
//! diffusion-based variance imaging, and image quality metrics.

pub mod beamform;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod rng;
pub mod signal;
pub mod simulate;
pub mod types;

pub use error::{Error, Result};
pub use types::{BModeImage, ChannelData, ImagingGrid, ProbeGeometry, RfImage};
