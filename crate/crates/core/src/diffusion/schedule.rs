use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 50;
pub const DEFAULT_SIGMA_MAX: f64 = 1.0;
pub const DEFAULT_SIGMA_MIN: f64 = 0.002;

/// Strictly decreasing noise levels `σ_1 > … > σ_T > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_sigmas(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::config("noise schedule is empty"));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) || sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("noise schedule must be positive and strictly decreasing"));
        }
        Ok(Self { sigmas })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn steps(&self) -> usize {
        self.sigmas.len()
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        make_schedule(DEFAULT_STEPS, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN).expect("default schedule is valid")
    }
}

/// Geometric ladder `σ_t = σ_max (σ_min/σ_max)^((t−1)/(T−1))`.
pub fn make_schedule(steps: usize, sigma_max: f64, sigma_min: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::config(format!("schedule needs at least 2 steps, got {steps}")));
    }
    if !(sigma_min > 0.0 && sigma_max > sigma_min && sigma_max.is_finite()) {
        return Err(Error::config(format!(
            "schedule needs sigma_max > sigma_min > 0, got {sigma_max} and {sigma_min}"
        )));
    }
    let ratio = sigma_min / sigma_max;
    let last = (steps - 1) as f64;
    let mut sigmas: Vec<f64> = (0..steps).map(|t| sigma_max * ratio.powf(t as f64 / last)).collect();
    sigmas[0] = sigma_max;
    sigmas[steps - 1] = sigma_min;
    NoiseSchedule::from_sigmas(sigmas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(make_schedule(2, 1.0, 0.01).unwrap().sigmas(), &[1.0, 0.01]);
        let s = make_schedule(3, 1.0, 0.01).unwrap();
        assert_eq!(s.sigmas()[0], 1.0);
        assert!((s.sigmas()[1] - 0.1).abs() < 1e-15);
        assert_eq!(s.sigmas()[2], 0.01);
    }

    #[test]
    fn invalid_inputs() {
        assert!(make_schedule(1, 1.0, 0.1).is_err());
        assert!(make_schedule(5, 0.1, 1.0).is_err());
        assert!(make_schedule(5, 1.0, 0.0).is_err());
        assert!(NoiseSchedule::from_sigmas(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn default_has_fifty_steps() {
        let s = NoiseSchedule::default();
        assert_eq!(s.steps(), 50);
        assert_eq!(s.sigmas()[0], 1.0);
        assert_eq!(s.sigmas()[49], 0.002);
    }
}
