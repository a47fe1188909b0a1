use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Nakagami-m fading with exponential path loss.
///
/// `eta` and the noise parameters of the owning scenario are stored already
/// multiplied by `scale_factor`, so samples live in scaled linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NakagamiConfig {
    pub p_t: f64,
    pub eta: f64,
    pub d0: f64,
    pub alpha: f64,
    pub m_near: f64,
    pub m_far: f64,
    pub d_break: f64,
    pub scale_factor: f64,
}

impl NakagamiConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p_t", self.p_t),
            ("eta", self.eta),
            ("d0", self.d0),
            ("alpha", self.alpha),
            ("d_break", self.d_break),
            ("scale_factor", self.scale_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("nakagami {name} must be > 0, got {v}")));
            }
        }
        for (name, m) in [("m_near", self.m_near), ("m_far", self.m_far)] {
            if !(m.is_finite() && m >= 0.5) {
                return Err(Error::Config(format!("nakagami {name} must be >= 0.5, got {m}")));
            }
        }
        Ok(())
    }
}

/// Dual-slope Log-Normal shadowing; samples are in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNormalConfig {
    pub p_t: f64,
    pub eta: f64,
    pub d0: f64,
    pub dc: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl LogNormalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0 && self.d0 < self.dc && self.dc.is_finite()) {
            return Err(Error::Config(format!(
                "log-normal requires 0 < d0 < dc, got d0={} dc={}",
                self.d0, self.dc
            )));
        }
        for (name, v) in [
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("log-normal {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Where additive noise is applied for Log-Normal scenarios.
///
/// Nakagami samples are already linear, so both variants coincide there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDomain {
    /// The scenario's own sample domain (dB for Log-Normal).
    #[default]
    Native,
    /// Linear watts: the dB sample is converted, noise added, and converted back.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub mean: f64,
    pub var: f64,
    pub enabled: bool,
    #[serde(default)]
    pub domain: NoiseDomain,
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self {
            mean: 0.0,
            var: 0.0,
            enabled: false,
            domain: NoiseDomain::Native,
        }
    }

    pub fn gaussian(mean: f64, var: f64) -> Self {
        Self {
            mean,
            var,
            enabled: true,
            domain: NoiseDomain::Native,
        }
    }

    /// `(mean, var)` actually applied.
    pub fn effective(&self) -> (f64, f64) {
        if self.enabled {
            (self.mean, self.var)
        } else {
            (0.0, 0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.var.is_finite() && self.var >= 0.0 && self.mean.is_finite()) {
            return Err(Error::Config(format!(
                "noise needs finite mean and var >= 0, got mean={} var={}",
                self.mean, self.var
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelFamily {
    Nakagami(NakagamiConfig),
    LogNormal(LogNormalConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub family: ChannelFamily,
    pub noise: NoiseConfig,
    pub distance_grid: Vec<f64>,
    pub scaling_coef: f64,
}

pub const BUILTIN_SCENARIOS: [&str; 4] = ["N1", "N2", "LN1", "LN2"];

const P_T: f64 = 0.281_838_15;
const NAKAGAMI_SCALE: f64 = 1e14;

fn default_grid() -> Vec<f64> {
    (1..=30).map(|i| f64::from(i) * 10.0).collect()
}

/// N1 noise, scaled by 1e14: mean 1.256e-15 W, variance 1e-15.
fn nakagami_noise() -> NoiseConfig {
    NoiseConfig::gaussian(1.256e-15 * NAKAGAMI_SCALE, 1e-15 * NAKAGAMI_SCALE)
}

impl ScenarioConfig {
    pub fn n1() -> Self {
        Self {
            name: "N1".into(),
            family: ChannelFamily::Nakagami(NakagamiConfig {
                p_t: P_T,
                eta: 7.29e-14 * NAKAGAMI_SCALE,
                d0: 100.0,
                alpha: 2.0,
                m_near: 2.0,
                m_far: 1.0,
                d_break: 140.0,
                scale_factor: NAKAGAMI_SCALE,
            }),
            noise: nakagami_noise(),
            distance_grid: default_grid(),
            scaling_coef: 2.0,
        }
    }

    /// N1 with `m_near = 1.5` and `alpha = 2.5`.
    pub fn n2() -> Self {
        let mut s = Self::n1();
        s.name = "N2".into();
        if let ChannelFamily::Nakagami(cfg) = &mut s.family {
            cfg.m_near = 1.5;
            cfg.alpha = 2.5;
        }
        s
    }

    /// Urban Log-Normal shadowing.
    pub fn ln1() -> Self {
        Self {
            name: "LN1".into(),
            family: ChannelFamily::LogNormal(LogNormalConfig {
                p_t: P_T,
                eta: 7.29e-10,
                d0: 1.0,
                dc: 102.0,
                delta1: 3.9,
                delta2: 5.2,
                alpha1: 2.56,
                alpha2: 6.34,
            }),
            noise: NoiseConfig::disabled(),
            distance_grid: default_grid(),
            scaling_coef: 435.0,
        }
    }

    /// Rural Log-Normal shadowing.
    pub fn ln2() -> Self {
        let mut s = Self::ln1();
        s.name = "LN2".into();
        s.family = ChannelFamily::LogNormal(LogNormalConfig {
            p_t: P_T,
            eta: 7.29e-10,
            d0: 1.0,
            dc: 182.0,
            delta1: 3.1,
            delta2: 3.6,
            alpha1: 1.89,
            alpha2: 5.86,
        });
        s
    }

    /// Case-insensitive lookup in the built-in catalog.
    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "N1" => Some(Self::n1()),
            "N2" => Some(Self::n2()),
            "LN1" => Some(Self::ln1()),
            "LN2" => Some(Self::ln2()),
            _ => None,
        }
    }

    pub fn d_max(&self) -> f64 {
        self.distance_grid.last().copied().unwrap_or(f64::NAN)
    }

    /// Index of `d` in the distance grid, if present.
    pub fn grid_index(&self, d: f64) -> Option<usize> {
        self.distance_grid
            .iter()
            .position(|&g| (g - d).abs() <= 1e-9 * g.abs().max(1.0))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            ChannelFamily::Nakagami(c) => c.validate()?,
            ChannelFamily::LogNormal(c) => c.validate()?,
        }
        self.noise.validate()?;
        if self.distance_grid.is_empty() {
            return Err(Error::Config("distance grid is empty".into()));
        }
        if self.distance_grid.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("distances must be finite and > 0".into()));
        }
        if self.distance_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("distance grid must be strictly increasing".into()));
        }
        if let ChannelFamily::LogNormal(c) = &self.family {
            if self.distance_grid[0] < c.d0 {
                return Err(Error::Config(format!(
                    "log-normal grid starts at {} below d0 = {}",
                    self.distance_grid[0], c.d0
                )));
            }
        }
        if !self.scaling_coef.is_finite() {
            return Err(Error::Config("scaling_coef must be finite".into()));
        }
        Ok(())
    }
}
