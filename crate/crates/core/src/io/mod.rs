//! File formats: tensors with `key=value` sidecars, channel data bundles and
//! PGM renders.

mod tensor;

pub use tensor::{read_array2, read_tensor, sidecar_path, write_array2, write_tensor, Metadata, Tensor, MAGIC};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{BModeImage, ChannelData, ImagingGrid, ProbeGeometry, RfImage};

/// Writes channel data as a `[Nt × Ne]` tensor plus a geometry sidecar.
///
/// Sidecar keys: `kind=channel_data`, `transmit_angle`, `start_time`,
/// `center_frequency`, `sampling_frequency`, `sound_speed`,
/// `element_count`, and `element_position.<e>` for every element.
pub fn write_channel_data(path: &Path, data: &ChannelData) -> Result<()> {
    write_array2(path, &data.samples)?;
    let g = &data.geometry;
    let mut meta = Metadata::default();
    meta.set("kind", "channel_data")
        .set("transmit_angle", data.transmit_angle)
        .set("start_time", data.start_time)
        .set("center_frequency", g.center_frequency)
        .set("sampling_frequency", g.sampling_frequency)
        .set("sound_speed", g.sound_speed)
        .set("element_count", g.element_count());
    for (e, x) in g.element_positions.iter().enumerate() {
        meta.set(&format!("element_position.{e:04}"), x);
    }
    meta.write(&sidecar_path(path))
}

pub fn read_channel_data(path: &Path) -> Result<ChannelData> {
    let samples = read_array2(path)?;
    let meta = Metadata::read(&sidecar_path(path))?;
    let count = meta.get_f64("element_count")? as usize;
    let mut positions = Vec::with_capacity(count);
    for e in 0..count {
        let key = format!("element_position.{e:04}");
        let v = match meta.get(&key) {
            Some(_) => meta.get_f64(&key)?,
            None => meta.get_f64(&format!("element_position.{e}"))?,
        };
        positions.push(v);
    }
    let geometry = ProbeGeometry::new(
        positions,
        meta.get_f64("center_frequency")?,
        meta.get_f64("sampling_frequency")?,
        meta.get("sound_speed").map_or(Ok(crate::types::DEFAULT_SOUND_SPEED), |_| meta.get_f64("sound_speed"))?,
    )
    .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let start_time = meta.get("start_time").map_or(Ok(0.0), |_| meta.get_f64("start_time"))?;
    ChannelData::new(samples, meta.get_f64("transmit_angle")?, start_time, geometry)
}

/// Writes an image tensor with its grid in the sidecar (`x0`, `dx`, `nx`,
/// `z0`, `dz`, `nz`) plus any extra keys.
pub fn write_image(path: &Path, img: &RfImage, extra: &Metadata) -> Result<()> {
    write_array2(path, &img.values)?;
    let mut meta = extra.clone();
    meta.set("x0", img.grid.x[0])
        .set("dx", img.grid.dx())
        .set("nx", img.grid.nx())
        .set("z0", img.grid.z[0])
        .set("dz", img.grid.dz())
        .set("nz", img.grid.nz());
    meta.write(&sidecar_path(path))
}

/// Reads an image tensor. Without a sidecar the grid defaults to unit pixel
/// spacing starting at 0.
pub fn read_image(path: &Path) -> Result<(RfImage, Metadata)> {
    let values = read_array2(path)?;
    let (nz, nx) = values.dim();
    let side = sidecar_path(path);
    let meta = if side.exists() { Metadata::read(&side)? } else { Metadata::default() };
    let axis = |origin: &str, step: &str, n: usize| -> Result<Vec<f64>> {
        let o = if meta.get(origin).is_some() { meta.get_f64(origin)? } else { 0.0 };
        let d = if meta.get(step).is_some() { meta.get_f64(step)? } else { 1.0 };
        Ok((0..n).map(|i| o + i as f64 * d).collect())
    };
    let grid = ImagingGrid::new(axis("x0", "dx", nx)?, axis("z0", "dz", nz)?)
        .map_err(|e| Error::data(format!("{}: {e}", side.display())))?;
    Ok((RfImage::new(values, grid)?, meta))
}

/// Binary PGM (P5, 8-bit, row-major); `-dynamic_range` dB maps to 0 and 0 dB
/// to 255.
pub fn pgm_bytes(img: &BModeImage) -> Vec<u8> {
    let (rows, cols) = img.values_db.dim();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(img.values_db.iter().map(|&db| {
        let level = ((db + img.dynamic_range) / img.dynamic_range).clamp(0.0, 1.0);
        (level * 255.0).round() as u8
    }));
    out
}

pub fn write_pgm(path: &Path, img: &BModeImage) -> Result<()> {
    fs::write(path, pgm_bytes(img)).map_err(|e| Error::io(path, e))
}
