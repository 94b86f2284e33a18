use ndarray::{Array2, Array3};

use crate::simulate::{receive_delay, transmit_delay};
use crate::types::{ChannelData, ImagingGrid, ProbeGeometry};

use super::DelayedDataMatrix;

/// Round-trip delays `[Nz × Nx × Ne]` in seconds.
pub fn compute_delays(grid: &ImagingGrid, geometry: &ProbeGeometry, transmit_angle: f64) -> Array3<f64> {
    let ne = geometry.element_count();
    let mut out = Array3::zeros((grid.nz(), grid.nx(), ne));
    for (i, &z) in grid.z.iter().enumerate() {
        for (j, &x) in grid.x.iter().enumerate() {
            let d = pixel_delays(x, z, geometry, transmit_angle);
            for (e, v) in d.into_iter().enumerate() {
                out[(i, j, e)] = v;
            }
        }
    }
    out
}

/// Delays of one pixel to every element.
pub fn pixel_delays(x: f64, z: f64, geometry: &ProbeGeometry, transmit_angle: f64) -> Vec<f64> {
    let c = geometry.sound_speed;
    let tx = transmit_delay(x, z, transmit_angle, c);
    geometry
        .element_positions
        .iter()
        .map(|&xe| tx + receive_delay(x, z, xe, c))
        .collect()
}

/// Contiguous range of elements used for one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Aperture {
    pub first: usize,
    /// Exclusive.
    pub end: usize,
}

impl Aperture {
    pub fn len(&self) -> usize {
        self.end - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.first
    }

    pub fn contains(&self, e: usize) -> bool {
        e >= self.first && e < self.end
    }

    pub fn mask(&self, element_count: usize) -> Vec<bool> {
        (0..element_count).map(|e| self.contains(e)).collect()
    }
}

/// Expanding receive aperture: elements with `|x_e − x| <= z / (2 f#)`.
/// Never empty; falls back to the element nearest to `x`.
pub fn active_aperture(x: f64, z: f64, geometry: &ProbeGeometry, f_number: f64) -> Aperture {
    let half = z.abs() / (2.0 * f_number);
    let pos = &geometry.element_positions;
    let first = pos.iter().position(|&xe| (xe - x).abs() <= half);
    match first {
        Some(first) => {
            let end = pos[first..].iter().position(|&xe| (xe - x).abs() > half).map_or(pos.len(), |k| first + k);
            Aperture { first, end }
        }
        None => {
            let nearest = pos
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(e, _)| e)
                .unwrap_or(0);
            Aperture {
                first: nearest,
                end: nearest + 1,
            }
        }
    }
}

/// Linear interpolation of channel `e` at fractional sample index `s`; zero outside
/// the recorded span.
#[inline]
pub(crate) fn interpolate(samples: &Array2<f64>, e: usize, s: f64) -> f64 {
    let nt = samples.nrows();
    if !(s >= 0.0) || s > (nt - 1) as f64 {
        return 0.0;
    }
    let i0 = s.floor() as usize;
    if i0 + 1 >= nt {
        return samples[(nt - 1, e)];
    }
    let frac = s - i0 as f64;
    if frac == 0.0 {
        return samples[(i0, e)];
    }
    let a = samples[(i0, e)];
    let b = samples[(i0 + 1, e)];
    a + frac * (b - a)
}

/// Delayed samples `[Ne × Np]` for one pixel. Tap `k` reads channel `e` at
/// `delay_e + (k − (Np−1)/2)/fs`; masked-out elements are zero.
pub fn extract_delayed(data: &ChannelData, delays: &[f64], mask: &[bool], temporal_window: usize) -> DelayedDataMatrix {
    let ne = data.geometry.element_count();
    let fs = data.geometry.sampling_frequency;
    let np = temporal_window.max(1);
    let centre = (np as f64 - 1.0) / 2.0;
    let mut y = Array2::zeros((ne, np));
    for e in 0..ne {
        if !mask.get(e).copied().unwrap_or(false) {
            continue;
        }
        let base = (delays[e] - data.start_time) * fs;
        for k in 0..np {
            y[(e, k)] = interpolate(&data.samples, e, base + (k as f64 - centre));
        }
    }
    DelayedDataMatrix { y }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> ProbeGeometry {
        ProbeGeometry::new(vec![-1e-3, 0.0, 2e-3], 5e6, 20e6, 1540.0).unwrap()
    }

    #[test]
    fn on_axis_delay_is_round_trip() {
        let d = pixel_delays(0.0, 0.02, &probe(), 0.0);
        assert!((d[1] - 2.0 * 0.02 / 1540.0).abs() < 1e-18);
        let d = pixel_delays(2e-3, 0.03, &probe(), 0.0);
        assert!((d[2] - 2.0 * 0.03 / 1540.0).abs() < 1e-18);
    }

    #[test]
    fn aperture_grows_with_depth() {
        let p = ProbeGeometry::linear(64, 3e-4, 5e6, 20e6, 1540.0).unwrap();
        let shallow = active_aperture(0.0, 5e-3, &p, 1.75);
        let deep = active_aperture(0.0, 30e-3, &p, 1.75);
        assert!(shallow.len() < deep.len());
        assert!(deep.len() <= 64);
        let none = active_aperture(0.0, 0.0, &p, 1.75);
        assert_eq!(none.len(), 1);
    }

    fn channel(samples: Vec<f64>) -> ChannelData {
        let n = samples.len();
        let cols: Vec<f64> = samples.iter().flat_map(|&v| [v, v, v]).collect();
        ChannelData::new(Array2::from_shape_vec((n, 3), cols).unwrap(), 0.0, 0.0, probe()).unwrap()
    }

    #[test]
    fn interpolation_contract() {
        let data = channel(vec![1.0, 3.0, -2.0, 5.0]);
        let fs = 20e6;
        let mask = [true, true, false];
        let y = extract_delayed(&data, &[1.0 / fs, 1.5 / fs, 1.0 / fs], &mask, 1);
        assert_eq!(y.y[(0, 0)], 3.0);
        assert_eq!(y.y[(1, 0)], 0.5);
        assert_eq!(y.y[(2, 0)], 0.0);
        let beyond = extract_delayed(&data, &[10.0 / fs, -1.0 / fs, 3.0 / fs], &[true; 3], 1);
        assert_eq!(beyond.y[(0, 0)], 0.0);
        assert_eq!(beyond.y[(1, 0)], 0.0);
        assert_eq!(beyond.y[(2, 0)], 5.0);
    }

    #[test]
    fn temporal_taps_are_centred() {
        let data = channel(vec![1.0, 3.0, -2.0, 5.0]);
        let fs = 20e6;
        let y = extract_delayed(&data, &[1.0 / fs; 3], &[true; 3], 3);
        assert_eq!(y.y.row(0).to_vec(), vec![1.0, 3.0, -2.0]);
    }
}
