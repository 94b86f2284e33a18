use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::Phantom;
use crate::types::ImagingGrid;

/// Region geometry in grid coordinates (meters), or a phantom label name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegionShape {
    Circle { x: f64, z: f64, radius: f64 },
    Rectangle { x_min: f64, x_max: f64, z_min: f64, z_max: f64 },
    /// Pixels whose phantom label has this name.
    Label { label: String },
}

/// A resolved, non-empty boolean pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub name: String,
    pub mask: Array2<bool>,
}

impl RegionMask {
    pub fn from_mask(name: impl Into<String>, mask: Array2<bool>) -> Result<Self> {
        let name = name.into();
        if !mask.iter().any(|&m| m) {
            return Err(Error::config(format!("region '{name}' is empty")));
        }
        Ok(Self { name, mask })
    }

    pub fn pixel_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Values of `img` inside the mask, in row-major order.
    pub fn values(&self, img: &Array2<f64>) -> Vec<f64> {
        img.iter().zip(self.mask.iter()).filter(|(_, &m)| m).map(|(&v, _)| v).collect()
    }
}

impl RegionShape {
    /// Resolves the shape on a grid. Shapes reaching outside the grid are a
    /// configuration error, as are empty results.
    pub fn resolve(&self, name: &str, grid: &ImagingGrid, phantom: Option<&Phantom>) -> Result<RegionMask> {
        let off_grid = || Error::config(format!("region '{name}' lies outside the image grid"));
        let mask = match self {
            RegionShape::Circle { x, z, radius } => {
                if !(*radius > 0.0)
                    || !grid.contains(x - radius, z - radius)
                    || !grid.contains(x + radius, z + radius)
                {
                    return Err(off_grid());
                }
                Array2::from_shape_fn(grid.shape(), |(i, j)| {
                    (grid.x[j] - x).powi(2) + (grid.z[i] - z).powi(2) <= radius * radius
                })
            }
            RegionShape::Rectangle { x_min, x_max, z_min, z_max } => {
                if !(x_max >= x_min && z_max >= z_min) || !grid.contains(*x_min, *z_min) || !grid.contains(*x_max, *z_max) {
                    return Err(off_grid());
                }
                Array2::from_shape_fn(grid.shape(), |(i, j)| {
                    grid.x[j] >= *x_min && grid.x[j] <= *x_max && grid.z[i] >= *z_min && grid.z[i] <= *z_max
                })
            }
            RegionShape::Label { label } => {
                let phantom =
                    phantom.ok_or_else(|| Error::config(format!("region '{name}' refers to label '{label}' but no phantom labels were given")))?;
                if phantom.labels.dim() != grid.shape() {
                    return Err(Error::config("phantom labels do not match the image grid"));
                }
                let id = phantom
                    .label_of(label)
                    .ok_or_else(|| Error::config(format!("unknown phantom label '{label}'")))?;
                phantom.labels.mapv(|l| l == id)
            }
        };
        RegionMask::from_mask(name, mask)
    }
}
