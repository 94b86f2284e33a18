//! Pluggable denoisers.
//!
//! A denoiser maps a noisy image `x_t` at noise level `σ_t` to an estimate of
//! the clean image. The analytic Wiener denoiser is the posterior mean under a
//! zero-mean Gaussian prior; the external denoiser delegates each call to a
//! separate executable through tensor files, so a neural network in any
//! runtime can be plugged in.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_tensor, sidecar_path, write_tensor, Metadata, Tensor};

/// Identifies one denoiser call inside a sampling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallContext {
    pub sample_index: usize,
    pub step: usize,
}

pub trait Denoiser: Send + Sync {
    fn denoise(&self, x_t: &Array2<f64>, sigma: f64, ctx: CallContext) -> Result<Array2<f64>>;
}

/// Prior variance of the analytic denoiser.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorVariance {
    Scalar(f64),
    Map(Array2<f64>),
}

/// `x̂₀ = v / (v + σ²) ⊙ x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerDenoiser {
    pub prior: PriorVariance,
}

impl WienerDenoiser {
    pub fn new(prior: PriorVariance) -> Result<Self> {
        let ok = match &prior {
            PriorVariance::Scalar(v) => *v >= 0.0 && v.is_finite(),
            PriorVariance::Map(m) => m.iter().all(|v| *v >= 0.0 && v.is_finite()),
        };
        if !ok {
            return Err(Error::config("prior variance must be finite and >= 0"));
        }
        Ok(Self { prior })
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(PriorVariance::Scalar(v))
    }
}

impl Denoiser for WienerDenoiser {
    fn denoise(&self, x_t: &Array2<f64>, sigma: f64, _ctx: CallContext) -> Result<Array2<f64>> {
        if !(sigma > 0.0) {
            return Err(Error::config(format!("denoiser noise level must be positive, got {sigma}")));
        }
        let s2 = sigma * sigma;
        match &self.prior {
            PriorVariance::Scalar(v) => {
                let gain = v / (v + s2);
                Ok(x_t.mapv(|x| gain * x))
            }
            PriorVariance::Map(v) => {
                if v.dim() != x_t.dim() {
                    return Err(Error::config(format!(
                        "prior variance map {:?} does not match image {:?}",
                        v.dim(),
                        x_t.dim()
                    )));
                }
                let mut out = Array2::zeros(x_t.dim());
                Zip::from(&mut out).and(x_t).and(v).for_each(|o, &x, &v| *o = v / (v + s2) * x);
                Ok(out)
            }
        }
    }
}

/// Method-of-moments prior variance from a measurement with white noise of
/// std `noise_std`: `max(mean_window(x²) − γ², 0)` over a centered square
/// window (clipped at the borders).
pub fn local_prior_variance(x: &Array2<f64>, noise_std: f64, window: usize) -> Array2<f64> {
    let (rows, cols) = x.dim();
    let half = window / 2;
    // Summed-area table of x².
    let mut sat = Array2::<f64>::zeros((rows + 1, cols + 1));
    for i in 0..rows {
        let mut row_sum = 0.0;
        for j in 0..cols {
            row_sum += x[(i, j)] * x[(i, j)];
            sat[(i + 1, j + 1)] = sat[(i, j + 1)] + row_sum;
        }
    }
    let g2 = noise_std * noise_std;
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let (r0, r1) = (i.saturating_sub(half), (i + half + 1).min(rows));
        let (c0, c1) = (j.saturating_sub(half), (j + half + 1).min(cols));
        let sum = sat[(r1, c1)] - sat[(r0, c1)] - sat[(r1, c0)] + sat[(r0, c0)];
        let n = ((r1 - r0) * (c1 - c0)) as f64;
        (sum / n - g2).max(0.0)
    })
}

/// Runs `<executable> <request> <response>` per call.
///
/// Each call writes `req_<n>.ust` (the image) and `req_<n>.meta` (a single
/// `sigma=<decimal>` line) into `<work_dir>/sample_<index>/`, runs the tool
/// there, and reads back `resp_<n>.ust` of the same shape. `n` is the step.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalDenoiser {
    pub executable: PathBuf,
    pub work_dir: PathBuf,
}

impl ExternalDenoiser {
    fn sample_dir(&self, sample_index: usize) -> PathBuf {
        self.work_dir.join(format!("sample_{sample_index:04}"))
    }

    fn fail(ctx: CallContext, reason: impl Into<String>) -> Error {
        Error::Denoiser {
            sample: ctx.sample_index,
            reason: reason.into(),
        }
    }
}

impl Denoiser for ExternalDenoiser {
    fn denoise(&self, x_t: &Array2<f64>, sigma: f64, ctx: CallContext) -> Result<Array2<f64>> {
        let dir = self.sample_dir(ctx.sample_index);
        fs::create_dir_all(&dir).map_err(|e| Self::fail(ctx, format!("{}: {e}", dir.display())))?;
        // The tool runs inside `dir`, so every path handed to it is absolute.
        let dir = fs::canonicalize(&dir).map_err(|e| Self::fail(ctx, format!("{}: {e}", dir.display())))?;
        let exe = if self.executable.components().count() > 1 {
            fs::canonicalize(&self.executable)
                .map_err(|e| Self::fail(ctx, format!("{}: {e}", self.executable.display())))?
        } else {
            self.executable.clone()
        };
        let req = dir.join(format!("req_{}.ust", ctx.step));
        let resp = dir.join(format!("resp_{}.ust", ctx.step));
        write_tensor(&req, &Tensor::from_array2(x_t)).map_err(|e| Self::fail(ctx, e.to_string()))?;
        fs::write(sidecar_path(&req), format!("sigma={sigma}\n")).map_err(|e| Self::fail(ctx, e.to_string()))?;
        if resp.exists() {
            fs::remove_file(&resp).map_err(|e| Self::fail(ctx, e.to_string()))?;
        }
        let status = Command::new(&exe)
            .arg(&req)
            .arg(&resp)
            .current_dir(&dir)
            .status()
            .map_err(|e| Self::fail(ctx, format!("cannot run {}: {e}", self.executable.display())))?;
        if !status.success() {
            return Err(Self::fail(ctx, format!("step {}: {} exited with {status}", ctx.step, self.executable.display())));
        }
        let out = read_response(&resp, x_t.dim()).map_err(|e| Self::fail(ctx, format!("step {}: {e}", ctx.step)))?;
        Ok(out)
    }
}

fn read_response(path: &Path, shape: (usize, usize)) -> Result<Array2<f64>> {
    let tensor = read_tensor(path)?;
    if tensor.shape != [shape.0, shape.1] {
        return Err(Error::data(format!("response shape {:?}, expected {:?}", tensor.shape, shape)));
    }
    let out = tensor.to_array2()?;
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::data("response contains non-finite values"));
    }
    Ok(out)
}

/// Reads the noise level from a request sidecar.
pub fn read_request_sigma(request: &Path) -> Result<f64> {
    Metadata::read(&sidecar_path(request))?.get_f64("sigma")
}

/// Prior variance as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSetting {
    Scalar(f64),
    /// `"local"`: estimated from the measurement, see [`local_prior_variance`].
    Named(String),
}

/// Denoiser selection as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DenoiserSpec {
    Wiener {
        #[serde(default = "default_prior")]
        prior_variance: PriorSetting,
        /// Window side in pixels for the local prior.
        #[serde(default = "default_window")]
        window: usize,
    },
    External {
        executable: PathBuf,
        work_dir: PathBuf,
    },
}

fn default_prior() -> PriorSetting {
    PriorSetting::Named("local".into())
}

fn default_window() -> usize {
    9
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        DenoiserSpec::Wiener {
            prior_variance: default_prior(),
            window: default_window(),
        }
    }
}

impl DenoiserSpec {
    /// Instantiates the denoiser for a given measurement and noise level.
    pub fn build(&self, measurement: &Array2<f64>, noise_std: f64) -> Result<Box<dyn Denoiser>> {
        match self {
            DenoiserSpec::Wiener { prior_variance, window } => {
                let prior = match prior_variance {
                    PriorSetting::Scalar(v) => PriorVariance::Scalar(*v),
                    PriorSetting::Named(name) if name == "local" => {
                        if *window == 0 {
                            return Err(Error::config("local prior window must be >= 1"));
                        }
                        PriorVariance::Map(local_prior_variance(measurement, noise_std, *window))
                    }
                    PriorSetting::Named(other) => {
                        return Err(Error::config(format!("unknown prior variance '{other}' (number or \"local\")")))
                    }
                };
                Ok(Box::new(WienerDenoiser::new(prior)?))
            }
            DenoiserSpec::External { executable, work_dir } => Ok(Box::new(ExternalDenoiser {
                executable: executable.clone(),
                work_dir: work_dir.clone(),
            })),
        }
    }
}

/// One-shot denoise of `x_t` at level `sigma` with a denoiser built from
/// `spec` (local priors are estimated from `x_t` itself).
pub fn denoise(spec: &DenoiserSpec, x_t: &Array2<f64>, sigma: f64) -> Result<Array2<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::config(format!("denoiser noise level must be positive, got {sigma}")));
    }
    spec.build(x_t, sigma)?.denoise(
        x_t,
        sigma,
        CallContext {
            sample_index: 0,
            step: 0,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const CTX: CallContext = CallContext {
        sample_index: 0,
        step: 0,
    };

    #[test]
    fn wiener_examples() {
        let x = array![[1.0, -3.0]];
        let zero = WienerDenoiser::scalar(0.0).unwrap().denoise(&x, 0.5, CTX).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
        let half = WienerDenoiser::scalar(0.25).unwrap().denoise(&x, 0.5, CTX).unwrap();
        assert_eq!(half, array![[0.5, -1.5]]);
        let y = WienerDenoiser::scalar(1.0).unwrap().denoise(&array![[1.0]], 0.1, CTX).unwrap();
        assert!((y[(0, 0)] - 1.0 / 1.01).abs() < 1e-15);
        assert!((y[(0, 0)] - 0.990099).abs() < 1e-6);
    }

    #[test]
    fn wiener_map_and_validation() {
        let d = WienerDenoiser::new(PriorVariance::Map(array![[0.0, 1.0]])).unwrap();
        assert_eq!(d.denoise(&array![[2.0, 2.0]], 1.0, CTX).unwrap(), array![[0.0, 1.0]]);
        assert!(d.denoise(&array![[2.0]], 1.0, CTX).is_err());
        assert!(WienerDenoiser::scalar(-1.0).is_err());
        assert!(WienerDenoiser::scalar(1.0).unwrap().denoise(&array![[1.0]], 0.0, CTX).is_err());
    }

    #[test]
    fn local_prior_removes_noise_power() {
        let x = Array2::from_elem((5, 5), 2.0);
        let v = local_prior_variance(&x, 1.0, 3);
        assert!(v.iter().all(|&v| (v - 3.0).abs() < 1e-12));
        let v = local_prior_variance(&x, 3.0, 3);
        assert!(v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn local_prior_matches_direct_window_mean() {
        let x = Array2::from_shape_fn((6, 7), |(i, j)| ((i * 7 + j) as f64 * 0.37).sin());
        let v = local_prior_variance(&x, 0.1, 3);
        for i in 0..6usize {
            for j in 0..7usize {
                let mut s = 0.0;
                let mut n = 0.0;
                for a in i.saturating_sub(1)..(i + 2).min(6) {
                    for b in j.saturating_sub(1)..(j + 2).min(7) {
                        s += x[(a, b)] * x[(a, b)];
                        n += 1.0;
                    }
                }
                assert!((v[(i, j)] - (s / n - 0.01).max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: DenoiserSpec = toml::from_str("kind = \"wiener\"\nprior_variance = 0.5").unwrap();
        assert_eq!(
            spec,
            DenoiserSpec::Wiener {
                prior_variance: PriorSetting::Scalar(0.5),
                window: 9
            }
        );
        let spec: DenoiserSpec = toml::from_str("kind = \"external\"\nexecutable = \"/bin/true\"\nwork_dir = \"w\"").unwrap();
        assert!(matches!(spec, DenoiserSpec::External { .. }));
    }
}
