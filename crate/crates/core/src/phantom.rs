//! Synthetic echogenicity maps, multiplicative speckle and the empirical
//! diffusion-output model used as a statistical oracle.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::types::{ImagingGrid, RfImage};

/// Label value of pixels not covered by any primitive.
pub const BACKGROUND_LABEL: u32 = 0;

/// Geometric primitive with a constant echogenicity level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Primitive {
    Circle {
        #[serde(default)]
        name: Option<String>,
        x: f64,
        z: f64,
        radius: f64,
        level: f64,
    },
    Rectangle {
        #[serde(default)]
        name: Option<String>,
        x_min: f64,
        x_max: f64,
        z_min: f64,
        z_max: f64,
        level: f64,
    },
}

impl Primitive {
    fn level(&self) -> f64 {
        match self {
            Primitive::Circle { level, .. } | Primitive::Rectangle { level, .. } => *level,
        }
    }

    fn name(&self) -> Option<&str> {
        match self {
            Primitive::Circle { name, .. } | Primitive::Rectangle { name, .. } => name.as_deref(),
        }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        match *self {
            Primitive::Circle { x: cx, z: cz, radius, .. } => (x - cx).powi(2) + (z - cz).powi(2) <= radius * radius,
            Primitive::Rectangle {
                x_min, x_max, z_min, z_max, ..
            } => x >= x_min && x <= x_max && z >= z_min && z <= z_max,
        }
    }

    fn check(&self, grid: &ImagingGrid) -> Result<()> {
        if !(self.level() >= 0.0 && self.level().is_finite()) {
            return Err(Error::config(format!("primitive level must be >= 0, got {}", self.level())));
        }
        let inside = match *self {
            Primitive::Circle { x, z, radius, .. } => radius > 0.0 && grid.contains(x, z),
            Primitive::Rectangle {
                x_min, x_max, z_min, z_max, ..
            } => x_max > x_min && z_max > z_min && grid.contains(x_min, z_min) && grid.contains(x_max, z_max),
        };
        if inside {
            Ok(())
        } else {
            Err(Error::config(format!("primitive {self:?} lies outside the grid")))
        }
    }
}

/// Bright point target added to the scatterer cloud on top of the speckle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTarget {
    #[serde(default)]
    pub name: Option<String>,
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    #[serde(default = "default_background")]
    pub background: f64,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
    #[serde(default)]
    pub points: Vec<PointTarget>,
}

fn default_background() -> f64 {
    1.0
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            background: 1.0,
            primitives: Vec::new(),
            points: Vec::new(),
        }
    }
}

/// Echogenicity map `p` with region labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub echo_map: Array2<f64>,
    pub labels: Array2<u32>,
    /// `label_names[l]` names label `l`; label 0 is "background".
    pub label_names: Vec<String>,
    pub points: Vec<PointTarget>,
    pub grid: ImagingGrid,
}

impl Phantom {
    pub fn label_of(&self, name: &str) -> Option<u32> {
        self.label_names.iter().position(|n| n == name).map(|l| l as u32)
    }
}

/// Rasterizes a phantom spec. Later primitives overwrite earlier ones.
pub fn make_phantom(spec: &PhantomSpec, grid: &ImagingGrid) -> Result<Phantom> {
    if !(spec.background >= 0.0 && spec.background.is_finite()) {
        return Err(Error::config("background level must be >= 0"));
    }
    let shape = grid.shape();
    let mut echo_map = Array2::from_elem(shape, spec.background);
    let mut labels = Array2::from_elem(shape, BACKGROUND_LABEL);
    let mut label_names = vec!["background".to_string()];
    for (k, prim) in spec.primitives.iter().enumerate() {
        prim.check(grid)?;
        let label = label_names.len() as u32;
        label_names.push(prim.name().map(str::to_string).unwrap_or_else(|| format!("region{}", k + 1)));
        for (i, &z) in grid.z.iter().enumerate() {
            for (j, &x) in grid.x.iter().enumerate() {
                if prim.contains(x, z) {
                    echo_map[(i, j)] = prim.level();
                    labels[(i, j)] = label;
                }
            }
        }
    }
    for (k, point) in spec.points.iter().enumerate() {
        if !grid.contains(point.x, point.z) {
            return Err(Error::config(format!("point target {k} lies outside the grid")));
        }
        let label = label_names.len() as u32;
        label_names.push(point.name.clone().unwrap_or_else(|| format!("point{}", k + 1)));
        labels[grid.nearest(point.x, point.z)] = label;
    }
    Ok(Phantom {
        echo_map,
        labels,
        label_names,
        points: spec.points.clone(),
        grid: grid.clone(),
    })
}

/// Standard-normal multiplicative speckle `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleField {
    pub m: Array2<f64>,
    pub seed: u64,
}

/// Fills a `[rows × cols]` matrix with N(0, 1) draws, one keyed stream per row.
fn normal_field(shape: (usize, usize), seed: u64, domain: Domain, index: u64) -> Array2<f64> {
    let (rows, cols) = shape;
    let mut out = Array2::zeros(shape);
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let mut buf = vec![0.0; cols];
        rng::fill_standard_normal(seed, domain, rng::stream_id(index, i as u64), &mut buf);
        row.assign(&ndarray::ArrayView1::from(&buf));
    }
    debug_assert_eq!(out.nrows(), rows);
    out
}

impl SpeckleField {
    pub fn draw(grid: &ImagingGrid, seed: u64) -> Self {
        Self {
            m: normal_field(grid.shape(), seed, Domain::Speckle, 0),
            seed,
        }
    }
}

/// Tissue reflectivity `o = m ⊙ p`.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueReflectivity {
    pub o: Array2<f64>,
    pub grid: ImagingGrid,
}

pub fn reflectivity(phantom: &Phantom, speckle: &SpeckleField) -> Result<TissueReflectivity> {
    if speckle.m.dim() != phantom.echo_map.dim() {
        return Err(Error::data("speckle field and phantom have different shapes"));
    }
    Ok(TissueReflectivity {
        o: &speckle.m * &phantom.echo_map,
        grid: phantom.grid.clone(),
    })
}

pub fn draw_reflectivity(phantom: &Phantom, seed: u64) -> TissueReflectivity {
    let speckle = SpeckleField::draw(&phantom.grid, seed);
    TissueReflectivity {
        o: &speckle.m * &phantom.echo_map,
        grid: phantom.grid.clone(),
    }
}

/// One draw of the empirical model `ô_c = m ⊙ p + p^½ ⊙ G_c`.
///
/// `m` is the fixed speckle of the measurement; `G_c` is fresh per
/// `sample_seed`.
pub fn empirical_sample(phantom: &Phantom, speckle: &SpeckleField, sample_seed: u64) -> Result<RfImage> {
    if speckle.m.dim() != phantom.echo_map.dim() {
        return Err(Error::data("speckle field and phantom have different shapes"));
    }
    let g = normal_field(phantom.grid.shape(), sample_seed, Domain::EmpiricalSample, 0);
    let mut out = Array2::zeros(phantom.echo_map.dim());
    Zip::from(&mut out)
        .and(&speckle.m)
        .and(&phantom.echo_map)
        .and(&g)
        .for_each(|o, &m, &p, &g| *o = m * p + p.sqrt() * g);
    RfImage::new(out, phantom.grid.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ImagingGrid {
        ImagingGrid::from_bounds(-5e-3, 5e-3, 1e-4, 10e-3, 20e-3, 1e-4).unwrap()
    }

    fn circle(x: f64, z: f64, radius: f64, level: f64) -> Primitive {
        Primitive::Circle {
            name: None,
            x,
            z,
            radius,
            level,
        }
    }

    #[test]
    fn circle_in_background() {
        let spec = PhantomSpec {
            background: 1.0,
            primitives: vec![circle(0.0, 15e-3, 2e-3, 0.0)],
            points: vec![],
        };
        let ph = make_phantom(&spec, &grid()).unwrap();
        let (r, c) = ph.grid.nearest(0.0, 15e-3);
        assert_eq!(ph.echo_map[(r, c)], 0.0);
        assert_eq!(ph.labels[(r, c)], 1);
        assert_eq!(ph.echo_map[(0, 0)], 1.0);
        assert_eq!(ph.labels[(0, 0)], BACKGROUND_LABEL);
    }

    #[test]
    fn empty_spec_is_uniform() {
        let ph = make_phantom(&PhantomSpec::default(), &grid()).unwrap();
        assert!(ph.echo_map.iter().all(|v| *v == 1.0));
        assert!(ph.labels.iter().all(|v| *v == BACKGROUND_LABEL));
    }

    #[test]
    fn later_primitives_overwrite() {
        let spec = PhantomSpec {
            background: 1.0,
            primitives: vec![circle(-0.5e-3, 15e-3, 2e-3, 0.0), circle(0.5e-3, 15e-3, 2e-3, 2.0)],
            points: vec![],
        };
        let ph = make_phantom(&spec, &grid()).unwrap();
        let (r, c) = ph.grid.nearest(0.0, 15e-3);
        assert_eq!(ph.echo_map[(r, c)], 2.0);
        let (r, c) = ph.grid.nearest(-2.0e-3, 15e-3);
        assert_eq!(ph.echo_map[(r, c)], 0.0);
    }

    #[test]
    fn rejects_off_grid_and_negative_levels() {
        let off = PhantomSpec {
            primitives: vec![circle(0.0, 40e-3, 1e-3, 0.0)],
            ..Default::default()
        };
        assert!(matches!(make_phantom(&off, &grid()), Err(Error::Config(_))));
        let neg = PhantomSpec {
            primitives: vec![circle(0.0, 15e-3, 1e-3, -1.0)],
            ..Default::default()
        };
        assert!(make_phantom(&neg, &grid()).is_err());
    }

    #[test]
    fn zero_echogenicity_gives_zero_reflectivity_and_samples() {
        let spec = PhantomSpec {
            background: 0.0,
            ..Default::default()
        };
        let ph = make_phantom(&spec, &grid()).unwrap();
        assert!(draw_reflectivity(&ph, 9).o.iter().all(|v| *v == 0.0));
        let speckle = SpeckleField::draw(&ph.grid, 9);
        for s in 0..3 {
            assert!(empirical_sample(&ph, &speckle, s).unwrap().values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn reflectivity_is_seed_reproducible() {
        let ph = make_phantom(&PhantomSpec::default(), &grid()).unwrap();
        assert_eq!(draw_reflectivity(&ph, 5), draw_reflectivity(&ph, 5));
        assert_ne!(draw_reflectivity(&ph, 5), draw_reflectivity(&ph, 6));
    }
}
