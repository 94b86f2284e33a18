//! Pipeline stages (simulate, beamform, enhance, metrics, render) and the run
//! manifest that records what each stage read and wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamform::{beamform, BeamformMethod};
use crate::config::RunConfig;
use crate::diffusion::{estimate_noise_std, median_image, sample_many, variance_image, SampleSet};
use crate::error::{Error, Result};
use crate::io::{sidecar_path, write_channel_data, write_image, write_pgm, Metadata};
use crate::metrics::{evaluate, MetricReport};
use crate::phantom::{draw_reflectivity, make_phantom, Phantom};
use crate::signal::{envelope_detect, log_compress, normalize_unit, DEFAULT_DYNAMIC_RANGE_DB};
use crate::simulate::{samples_to_cover, simulate_channel_data, Acquisition, Pulse, ScattererCloud};
use crate::types::{ChannelData, ImagingGrid, RfImage};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STAGE_ORDER: [&str; 5] = ["simulate", "beamform", "enhance", "metrics", "render"];

/// What an image tensor holds; stored as `kind` in its sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    /// Signed beamformed or sampled image.
    Rf,
    /// Pixel-wise variance of samples.
    Variance,
    /// Non-negative amplitude.
    Envelope,
}

impl ImageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ImageKind::Rf => "rf",
            ImageKind::Variance => "variance",
            ImageKind::Envelope => "envelope",
        }
    }

    pub fn from_meta(meta: &Metadata) -> Result<Self> {
        match meta.get("kind").unwrap_or("rf") {
            "rf" => Ok(ImageKind::Rf),
            "variance" => Ok(ImageKind::Variance),
            "envelope" => Ok(ImageKind::Envelope),
            other => Err(Error::data(format!("unknown image kind '{other}'"))),
        }
    }
}

/// Linear amplitude of an image: the envelope of RF data, the square root of
/// a variance image, or the image itself.
pub fn amplitude(img: &RfImage, kind: ImageKind) -> Result<RfImage> {
    match kind {
        ImageKind::Rf => envelope_detect(img),
        ImageKind::Variance => {
            if img.values.iter().any(|&v| v < 0.0) {
                return Err(Error::data("variance image has negative values"));
            }
            RfImage::new(img.values.mapv(f64::sqrt), img.grid.clone())
        }
        ImageKind::Envelope => Ok(img.clone()),
    }
}

/// 60 dB binary PGM of an image's amplitude.
pub fn render(path: &Path, img: &RfImage, kind: ImageKind) -> Result<()> {
    write_pgm(path, &log_compress(&amplitude(img, kind)?, DEFAULT_DYNAMIC_RANGE_DB)?)
}

pub struct Simulation {
    pub phantom: Phantom,
    pub data: ChannelData,
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    let geometry = cfg.geometry()?;
    let grid = cfg.grid()?;
    let phantom = make_phantom(&cfg.phantom, &grid)?;
    let refl = draw_reflectivity(&phantom, cfg.seed);
    let cloud = ScattererCloud::from_phantom(&phantom, &refl);
    let a = &cfg.acquisition;
    let pulse = Pulse::new(geometry.center_frequency, a.fractional_bandwidth)?;
    let sample_count = a
        .sample_count
        .unwrap_or_else(|| samples_to_cover(&grid, &geometry, a.transmit_angle, &pulse, a.start_time));
    let acq = Acquisition {
        transmit_angle: a.transmit_angle,
        pulse,
        noise_std: a.noise_std,
        seed: cfg.seed,
        start_time: a.start_time,
        sample_count,
    };
    let data = simulate_channel_data(&cloud, &geometry, &acq)?;
    Ok(Simulation { phantom, data })
}

/// Writes `channels.ust`, `phantom.ust` (echogenicity) and `labels.ust`.
pub fn write_simulation(dir: &Path, sim: &Simulation) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let channels = dir.join("channels.ust");
    write_channel_data(&channels, &sim.data)?;
    let echo = dir.join("phantom.ust");
    let mut meta = Metadata::default();
    meta.set("kind", "echogenicity");
    let p = &sim.phantom;
    write_image(&echo, &RfImage::new(p.echo_map.clone(), p.grid.clone())?, &meta)?;
    let labels = dir.join("labels.ust");
    let mut meta = Metadata::default();
    meta.set("kind", "labels");
    for (l, name) in p.label_names.iter().enumerate() {
        meta.set(&format!("label.{l}"), name);
    }
    write_image(&labels, &RfImage::new(p.labels.mapv(f64::from), p.grid.clone())?, &meta)?;
    Ok(vec![channels, echo, labels])
}

/// Phantom labels as written by [`write_simulation`]; enough to resolve
/// label regions.
pub fn read_labels(path: &Path) -> Result<Phantom> {
    let (img, meta) = crate::io::read_image(path)?;
    let mut label_names = Vec::new();
    while let Some(name) = meta.get(&format!("label.{}", label_names.len())) {
        label_names.push(name.to_string());
    }
    let labels = img.values.mapv(|v| v as u32);
    if img.values.iter().any(|&v| v < 0.0 || v.fract() != 0.0 || v as usize >= label_names.len()) {
        return Err(Error::data(format!("{}: label values do not match the label names", path.display())));
    }
    Ok(Phantom {
        echo_map: img.values.mapv(|_| 0.0),
        labels,
        label_names,
        points: Vec::new(),
        grid: img.grid,
    })
}

pub fn beamform_stage(data: &ChannelData, grid: &ImagingGrid, method: BeamformMethod, cfg: &RunConfig, normalize: bool) -> Result<RfImage> {
    let img = beamform(method, data, grid, &cfg.beamform.beamformer())?;
    Ok(if normalize { normalize_unit(&img) } else { img })
}

pub struct Enhancement {
    pub measurement_noise: f64,
    pub samples: SampleSet,
    pub variance: RfImage,
    pub median: RfImage,
}

pub fn enhance(measurement: &RfImage, cfg: &RunConfig) -> Result<Enhancement> {
    let peak = measurement.max_abs();
    if !(peak <= 1.0 + 1e-6) {
        return Err(Error::config(format!(
            "enhance expects an image normalized to [-1, 1], max |x| = {peak}"
        )));
    }
    let gamma = if cfg.sampler.auto_noise()? {
        estimate_noise_std(&measurement.values)?
    } else {
        match cfg.sampler.measurement_noise {
            crate::config::NoiseSetting::Value(v) => v,
            _ => unreachable!(),
        }
    };
    let sampler = cfg.sampler.sampler(gamma, cfg.seed)?;
    if gamma < cfg.sampler.sigma_min {
        log::warn!(
            "measurement noise {gamma:.3e} is below sigma_min {:.3e}; samples will barely differ",
            cfg.sampler.sigma_min
        );
    }
    let denoiser = cfg.denoiser.build(&measurement.values, gamma)?;
    let samples = sample_many(measurement, denoiser.as_ref(), &sampler)?;
    Ok(Enhancement {
        measurement_noise: gamma,
        variance: variance_image(&samples)?,
        median: median_image(&samples)?,
        samples,
    })
}

/// Writes `samples/sample_<k>.ust`, `variance.ust`, `median.ust` and a PGM
/// render of each.
pub fn write_enhancement(dir: &Path, e: &Enhancement) -> Result<Vec<PathBuf>> {
    let sample_dir = dir.join("samples");
    create_dir(&sample_dir)?;
    let mut meta = Metadata::default();
    meta.set("measurement_noise", e.measurement_noise);
    let mut out = Vec::new();
    for (s, k) in e.samples.samples.iter().zip(&e.samples.sample_indices) {
        let path = sample_dir.join(format!("sample_{k:02}.ust"));
        let mut m = meta.clone();
        m.set("kind", "rf").set("sample_index", k);
        write_image(&path, s, &m)?;
        let pgm = path.with_extension("pgm");
        render(&pgm, s, ImageKind::Rf)?;
        out.extend([path, pgm]);
    }
    for (name, img, kind) in [
        ("variance", &e.variance, ImageKind::Variance),
        ("median", &e.median, ImageKind::Rf),
    ] {
        let path = dir.join(format!("{name}.ust"));
        let mut m = meta.clone();
        m.set("kind", kind.as_str());
        write_image(&path, img, &m)?;
        let pgm = path.with_extension("pgm");
        render(&pgm, img, kind)?;
        out.extend([path, pgm]);
    }
    Ok(out)
}

pub fn metrics_stage(img: &RfImage, kind: ImageKind, cfg: &RunConfig, phantom: Option<&Phantom>) -> Result<MetricReport> {
    evaluate(&amplitude(img, kind)?, &cfg.metrics, phantom)
}

/// Panels of a full run, in display order.
pub const PANELS: [&str; 5] = ["das", "das_variance", "ebmv", "ebmv_median", "ebmv_variance"];

/// Runs every stage for both beamformers and writes all outputs under `dir`:
/// `simulate/`, `das/`, `ebmv/` (beamformed image plus `enhance/`), one
/// `<panel>.pgm` and `<panel>.metrics.json` per panel, and the manifest.
pub fn run_all(cfg: &RunConfig, dir: &Path) -> Result<Manifest> {
    let mut manifest = Manifest::new(cfg);
    let sim = simulate(cfg)?;
    let written = write_simulation(&dir.join("simulate"), &sim)?;
    manifest.record(dir, "simulate", &[], &written)?;

    let grid = sim.phantom.grid.clone();
    let mut panels: Vec<(&str, RfImage, ImageKind)> = Vec::new();
    for (method, name) in [(BeamformMethod::Das, "das"), (BeamformMethod::Ebmv, "ebmv")] {
        let sub = dir.join(name);
        create_dir(&sub)?;
        let img = beamform_stage(&sim.data, &grid, method, cfg, true)?;
        let path = sub.join("beamformed.ust");
        let mut meta = Metadata::default();
        meta.set("kind", "rf").set("method", name);
        write_image(&path, &img, &meta)?;
        manifest.record(dir, &format!("beamform:{name}"), &written[..1], &[path.clone()])?;

        let e = enhance(&img, cfg)?;
        let outputs = write_enhancement(&sub.join("enhance"), &e)?;
        manifest.record(dir, &format!("enhance:{name}"), &[path], &outputs)?;
        panels.push((name, img, ImageKind::Rf));
        match method {
            BeamformMethod::Das => panels.push(("das_variance", e.variance, ImageKind::Variance)),
            BeamformMethod::Ebmv => {
                panels.push(("ebmv_median", e.median, ImageKind::Rf));
                panels.push(("ebmv_variance", e.variance, ImageKind::Variance));
            }
        }
    }

    let mut reports = Vec::new();
    let mut renders = Vec::new();
    for (name, img, kind) in &panels {
        let report = metrics_stage(img, *kind, cfg, Some(&sim.phantom))?;
        let path = dir.join(format!("{name}.metrics.json"));
        write_text(&path, &report.to_json())?;
        reports.push(path);
        let pgm = dir.join(format!("{name}.pgm"));
        render(&pgm, img, *kind)?;
        renders.push(pgm);
    }
    manifest.record(dir, "metrics", &[], &reports)?;
    manifest.record(dir, "render", &[], &renders)?;
    write_text(&dir.join("config.toml"), &cfg.canonical())?;
    manifest.write(dir)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the manifest's directory where possible.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Everything needed to replay a run: tool version, config hash, seed, and
/// the inputs and outputs of each stage with their digests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub stage_order: Vec<String>,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            tool: "usvar".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            stage_order: STAGE_ORDER.iter().map(|s| s.to_string()).collect(),
            stages: Vec::new(),
        }
    }

    /// Loads `dir/manifest.json` if it belongs to the same config, else
    /// starts a new one.
    pub fn open(cfg: &RunConfig, dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
            if m.config_sha256 == cfg.hash() {
                return Ok(m);
            }
        }
        Ok(Self::new(cfg))
    }

    /// Adds or replaces the record of `stage`.
    pub fn record(&mut self, dir: &Path, stage: &str, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<()> {
        let rec = StageRecord {
            stage: stage.to_string(),
            inputs: inputs.iter().map(|p| digest(dir, p)).collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| digest(dir, p)).collect::<Result<_>>()?,
        };
        match self.stages.iter_mut().find(|r| r.stage == stage) {
            Some(r) => *r = rec,
            None => self.stages.push(rec),
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_text(&dir.join(MANIFEST_FILE), &text)
    }
}

fn digest(dir: &Path, path: &Path) -> Result<FileDigest> {
    let mut hasher = Sha256::new();
    hasher.update(fs::read(path).map_err(|e| Error::io(path, e))?);
    let side = sidecar_path(path);
    if path.extension().is_some_and(|e| e == "ust") && side.exists() {
        hasher.update(fs::read(&side).map_err(|e| Error::io(&side, e))?);
    }
    let rel = path.strip_prefix(dir).unwrap_or(path);
    Ok(FileDigest {
        path: rel.to_string_lossy().replace('\\', "/"),
        sha256: hex::encode(hasher.finalize()),
    })
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
