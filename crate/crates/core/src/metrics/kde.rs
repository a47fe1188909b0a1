use serde::{Deserialize, Serialize};

use super::stats::sample_stats;
use crate::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// exp(-u²/2) underflows to exactly zero beyond this many bandwidths.
const KERNEL_CUTOFF: f64 = 39.0;

/// How `KdeConfig::bandwidth` turns into a kernel width for a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Width = `bandwidth × sample std` of each set (the `bw_method`
    /// scalar convention of common scientific KDE libraries).
    #[default]
    Relative,
    /// Width = `bandwidth`, in the units of the samples.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    pub bandwidth: f64,
    pub grid_divisor: usize,
    #[serde(default)]
    pub rule: BandwidthRule,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            bandwidth: 0.3,
            grid_divisor: 10,
            rule: BandwidthRule::Relative,
        }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::Config(format!("bandwidth must be > 0, got {}", self.bandwidth)));
        }
        if self.grid_divisor == 0 {
            return Err(Error::Config("grid_divisor must be >= 1".into()));
        }
        Ok(())
    }

    /// Kernel width used for `samples`.
    pub fn width_for(&self, samples: &[f64]) -> f64 {
        match self.rule {
            BandwidthRule::Absolute => self.bandwidth,
            BandwidthRule::Relative => {
                let (mean, var) = sample_stats(samples).unwrap_or((samples[0], 0.0));
                let floor = 1e-12 * mean.abs().max(1.0);
                (self.bandwidth * var.sqrt()).max(floor)
            }
        }
    }
}

/// Gaussian kernel density estimate at `x`.
pub fn kde(samples: &[f64], bandwidth: f64, x: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("kde needs at least one sample".into()));
    }
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let sum: f64 = samples
        .iter()
        .map(|xi| {
            let u = (x - xi) / bandwidth;
            (-0.5 * u * u).exp()
        })
        .sum();
    Ok(sum * INV_SQRT_2PI / (samples.len() as f64 * bandwidth))
}

/// KDE evaluated on every point of `grid` (which must be ascending).
///
/// Kernels are only summed inside the window where they do not underflow,
/// so the result equals the full sum.
pub fn kde_on_grid(samples: &[f64], bandwidth: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Domain("kde needs at least one sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = INV_SQRT_2PI / (samples.len() as f64 * bandwidth);
    let reach = KERNEL_CUTOFF * bandwidth;
    Ok(grid
        .iter()
        .map(|&x| {
            let lo = sorted.partition_point(|v| *v < x - reach);
            let hi = sorted.partition_point(|v| *v <= x + reach);
            sorted[lo..hi]
                .iter()
                .map(|xi| {
                    let u = (x - xi) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// Both KDE curves on the shared partition plus their overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCurves {
    pub xs: Vec<f64>,
    pub genuine: Vec<f64>,
    pub generated: Vec<f64>,
    pub oa: f64,
}

/// KDE curves and Overlapped Area on a uniform partition of
/// `[min, max]` of the union of both sets, with
/// `k = max(2, min(n_a, n_b) / grid_divisor)` points.
pub fn overlap_curves(genuine: &[f64], generated: &[f64], cfg: &KdeConfig) -> Result<OverlapCurves> {
    cfg.validate()?;
    if genuine.is_empty() || generated.is_empty() {
        return Err(Error::Domain("overlapped area needs two non-empty sample sets".into()));
    }
    let (lo, hi) = genuine
        .iter()
        .chain(generated)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain("overlapped area needs finite samples".into()));
    }
    let h_gen = cfg.width_for(genuine);
    let h_mod = cfg.width_for(generated);
    if lo == hi {
        // Every value is identical; the KDEs coincide iff the widths do.
        let oa = if h_gen == h_mod { 1.0 } else { 0.0 };
        return Ok(OverlapCurves {
            xs: vec![lo],
            genuine: vec![kde(genuine, h_gen, lo)?],
            generated: vec![kde(generated, h_mod, lo)?],
            oa,
        });
    }
    let k = (genuine.len().min(generated.len()) / cfg.grid_divisor).max(2);
    let step = (hi - lo) / (k - 1) as f64;
    let xs: Vec<f64> = (0..k)
        .map(|i| if i == k - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let f_gen = kde_on_grid(genuine, h_gen, &xs)?;
    let f_mod = kde_on_grid(generated, h_mod, &xs)?;
    let lower: Vec<f64> = f_gen.iter().zip(&f_mod).map(|(a, b)| a.min(*b)).collect();
    let area: f64 = lower
        .windows(2)
        .zip(xs.windows(2))
        .map(|(f, x)| 0.5 * (f[0] + f[1]) * (x[1] - x[0]))
        .fold(0.0, |acc, v| acc + v);
    Ok(OverlapCurves {
        xs,
        genuine: f_gen,
        generated: f_mod,
        oa: area.clamp(0.0, 1.0),
    })
}

pub fn overlapped_area(genuine: &[f64], generated: &[f64], cfg: &KdeConfig) -> Result<f64> {
    overlap_curves(genuine, generated, cfg).map(|c| c.oa)
}
