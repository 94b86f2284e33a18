use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::Phantom;
use crate::signal::DEFAULT_DYNAMIC_RANGE_DB;
use crate::types::RfImage;

use super::{fwhm, gcnr, snr, Axis, RegionMask, RegionShape, DEFAULT_GCNR_BINS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedRegion {
    pub name: String,
    #[serde(flatten)]
    pub shape: RegionShape,
}

/// Value domain for gCNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GcnrDomain {
    #[default]
    Linear,
    Db,
}

/// Which metrics to compute, on which named regions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub regions: Vec<NamedRegion>,
    /// Region containing the point target.
    pub fwhm_region: Option<String>,
    pub gcnr_inside: Option<String>,
    pub gcnr_outside: Option<String>,
    pub gcnr_bins: Option<usize>,
    pub gcnr_domain: GcnrDomain,
    pub snr_region: Option<String>,
}

/// One metric value or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MetricValue {
    fn from_result(r: Result<f64>) -> Self {
        match r {
            Ok(v) if v.is_finite() => Self { value: Some(v), error: None },
            Ok(v) => Self {
                value: None,
                error: Some(format!("non-finite result {v}")),
            },
            Err(e) => Self {
                value: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionInfo {
    pub name: String,
    pub pixels: usize,
}

/// JSON keys: `fwhm_axial` and `fwhm_lateral` (meters), `gcnr`, `snr`, each an
/// object with `value` or `error`; `regions` lists `{name, pixels}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fwhm_axial: Option<MetricValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fwhm_lateral: Option<MetricValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gcnr: Option<MetricValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<MetricValue>,
    pub regions: Vec<RegionInfo>,
}

impl MetricReport {
    pub fn metrics(&self) -> impl Iterator<Item = (&'static str, &MetricValue)> {
        [
            ("fwhm_axial", self.fwhm_axial.as_ref()),
            ("fwhm_lateral", self.fwhm_lateral.as_ref()),
            ("gcnr", self.gcnr.as_ref()),
            ("snr", self.snr.as_ref()),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
    }

    pub fn failures(&self) -> Vec<(&'static str, &str)> {
        self.metrics().filter_map(|(k, v)| v.error.as_deref().map(|e| (k, e))).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(format!("metric report: {e}")))
    }
}

fn db_image(envelope: &RfImage) -> RfImage {
    let peak = envelope.values.iter().fold(0.0_f64, |m, v| m.max(*v));
    let floor = 10f64.powf(-DEFAULT_DYNAMIC_RANGE_DB / 20.0);
    let values = if peak > 0.0 {
        envelope.values.mapv(|v| 20.0 * (v / peak).max(floor).log10())
    } else {
        envelope.values.clone()
    };
    RfImage {
        values,
        grid: envelope.grid.clone(),
    }
}

/// Evaluates the configured metrics on a linear-scale envelope.
///
/// Region resolution problems are configuration errors; metric failures are
/// recorded in the report.
pub fn evaluate(envelope: &RfImage, config: &MetricsConfig, phantom: Option<&Phantom>) -> Result<MetricReport> {
    let mut masks: Vec<RegionMask> = Vec::with_capacity(config.regions.len());
    for r in &config.regions {
        if masks.iter().any(|m| m.name == r.name) {
            return Err(Error::config(format!("region '{}' defined twice", r.name)));
        }
        masks.push(r.shape.resolve(&r.name, &envelope.grid, phantom)?);
    }
    let lookup = |name: &str| -> Result<&RegionMask> {
        masks
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::config(format!("metric refers to undefined region '{name}'")))
    };

    let mut report = MetricReport {
        fwhm_axial: None,
        fwhm_lateral: None,
        gcnr: None,
        snr: None,
        regions: masks
            .iter()
            .map(|m| RegionInfo {
                name: m.name.clone(),
                pixels: m.pixel_count(),
            })
            .collect(),
    };
    if let Some(name) = &config.fwhm_region {
        let region = lookup(name)?;
        report.fwhm_axial = Some(MetricValue::from_result(fwhm(envelope, region, Axis::Axial)));
        report.fwhm_lateral = Some(MetricValue::from_result(fwhm(envelope, region, Axis::Lateral)));
    }
    match (&config.gcnr_inside, &config.gcnr_outside) {
        (Some(i), Some(o)) => {
            let (inside, outside) = (lookup(i)?, lookup(o)?);
            let bins = config.gcnr_bins.unwrap_or(DEFAULT_GCNR_BINS);
            let value = match config.gcnr_domain {
                GcnrDomain::Linear => gcnr(envelope, inside, outside, bins),
                GcnrDomain::Db => gcnr(&db_image(envelope), inside, outside, bins),
            };
            report.gcnr = Some(MetricValue::from_result(value));
        }
        (None, None) => {}
        _ => return Err(Error::config("gCNR needs both gcnr_inside and gcnr_outside")),
    }
    if let Some(name) = &config.snr_region {
        report.snr = Some(MetricValue::from_result(snr(envelope, lookup(name)?)));
    }
    Ok(report)
}
