use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Delayed channel samples of one pixel, `[Ne × Np]`, rows in element order.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedDataMatrix {
    pub y: Array2<f64>,
}

impl DelayedDataMatrix {
    pub fn new(y: Array2<f64>) -> Self {
        Self { y }
    }

    pub fn elements(&self) -> usize {
        self.y.nrows()
    }

    pub fn taps(&self) -> usize {
        self.y.ncols()
    }

    /// Rows `first..end` only.
    pub fn rows(&self, first: usize, end: usize) -> Self {
        Self {
            y: self.y.slice(ndarray::s![first..end, ..]).to_owned(),
        }
    }

    pub fn center_tap(&self) -> usize {
        self.taps() / 2
    }
}

/// Loaded, symmetrized spatially smoothed covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub r: DMatrix<f64>,
    pub subarray_length: usize,
    /// Absolute loading added to the diagonal.
    pub loading: f64,
}

/// `R = (1/(M·Np)) Σ_l Σ_k y_l[k] y_l[k]ᵀ + ε I` over the `M = Ne − L + 1`
/// sliding subarrays, with `ε = loading · trace(R₀) / L`.
pub fn estimate_covariance(y: &DelayedDataMatrix, subarray_length: usize, loading: f64) -> Result<CovarianceEstimate> {
    let ne = y.elements();
    let np = y.taps();
    let l = subarray_length;
    if l == 0 || l > ne {
        return Err(Error::config(format!("subarray length {l} outside 1..={ne}")));
    }
    if np == 0 {
        return Err(Error::config("delayed data has no temporal taps"));
    }
    let m = ne - l + 1;
    let norm = 1.0 / (m * np) as f64;
    let mut r = DMatrix::<f64>::zeros(l, l);
    for i in 0..l {
        for j in i..l {
            let mut acc = 0.0;
            for k in 0..np {
                for s in 0..m {
                    acc += y.y[(s + i, k)] * y.y[(s + j, k)];
                }
            }
            r[(i, j)] = acc * norm;
            r[(j, i)] = acc * norm;
        }
    }
    let trace = r.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::Degenerate(format!("covariance trace is {trace}")));
    }
    let eps = loading * trace / l as f64;
    for i in 0..l {
        r[(i, i)] += eps;
    }
    Ok(CovarianceEstimate {
        r,
        subarray_length: l,
        loading: eps,
    })
}
