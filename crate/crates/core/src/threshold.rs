//! Adaptive clustering threshold from the density of pairwise visual
//! distances.
//!
//! A Gaussian KDE is evaluated on a uniform grid covering the samples; the
//! grid argmax is the density peak `p` and the threshold is `p + offset`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{AfpError, Result};

/// Bandwidth used when the samples have (near) zero spread.
pub const DEGENERATE_BANDWIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Scott,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    pub offset: f64,
    pub grid_points: usize,
    pub bandwidth_rule: BandwidthRule,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            offset: 0.15,
            grid_points: 512,
            bandwidth_rule: BandwidthRule::Scott,
        }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(AfpError::Range {
                name: "kde.offset",
                value: self.offset,
                expected: "[0, inf)",
            });
        }
        if self.grid_points < 16 {
            return Err(AfpError::Range {
                name: "kde.grid_points",
                value: self.grid_points as f64,
                expected: "[16, inf)",
            });
        }
        if let BandwidthRule::Fixed(h) = self.bandwidth_rule {
            if !(h.is_finite() && h > 0.0) {
                return Err(AfpError::Range {
                    name: "kde.bandwidth",
                    value: h,
                    expected: "(0, inf)",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub tau: f64,
    pub peak_p: f64,
    pub bandwidth: f64,
    pub sample_count: usize,
}

/// Gaussian kernel density estimate at `x`.
pub fn kde_density(samples: &[f64], bandwidth: f64, x: f64) -> f64 {
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * PI).sqrt());
    let two_h2 = 2.0 * bandwidth * bandwidth;
    norm * samples
        .iter()
        .map(|s| (-(x - s) * (x - s) / two_h2).exp())
        .sum::<f64>()
}

/// Scott's rule `sigma * n^(-1/5)` with the sample standard deviation.
pub fn scott_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let sigma = if samples.len() < 2 {
        0.0
    } else {
        let mean = samples.iter().sum::<f64>() / n;
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    if sigma < 1e-9 {
        DEGENERATE_BANDWIDTH
    } else {
        sigma * n.powf(-0.2)
    }
}

/// Evaluation range `[max(0, min - 3h), max + 3h]`.
pub fn kde_grid(samples: &[f64], bandwidth: f64) -> (f64, f64) {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ((lo - 3.0 * bandwidth).max(0.0), hi + 3.0 * bandwidth)
}

pub fn adaptive_threshold(samples: &[f64], cfg: &KdeConfig) -> Result<ThresholdReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(AfpError::InsufficientSamples);
    }
    if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
        return Err(AfpError::validation("distance samples", format!("non-finite sample {bad}")));
    }

    let bandwidth = match cfg.bandwidth_rule {
        BandwidthRule::Scott => scott_bandwidth(samples),
        BandwidthRule::Fixed(h) => h,
    };
    let (lo, hi) = kde_grid(samples, bandwidth);
    let step = (hi - lo) / (cfg.grid_points - 1) as f64;

    let mut peak_x = lo;
    let mut peak_density = f64::NEG_INFINITY;
    for k in 0..cfg.grid_points {
        let x = lo + step * k as f64;
        let density = kde_density(samples, bandwidth, x);
        if density > peak_density {
            peak_density = density;
            peak_x = x;
        }
    }

    // A Gaussian mixture peaks inside the sample range; snap grid overshoot back.
    let s_min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let peak_p = peak_x.clamp(s_min, s_max);

    Ok(ThresholdReport {
        tau: peak_p + cfg.offset,
        peak_p,
        bandwidth,
        sample_count: samples.len(),
    })
}
