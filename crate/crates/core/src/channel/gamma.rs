//! Gamma variates by the Marsaglia-Tsang squeeze/rejection method.
//!
//! For shape `k >= 1` with `d = k - 1/3`, `c = 1/sqrt(9d)`: draw `x ~ N(0,1)`,
//! set `v = (1 + c x)^3`, accept `d v` when `v > 0` and
//! `ln u < x^2/2 + d (1 - v + ln v)` (with the cheap squeeze
//! `u < 1 - 0.0331 x^4` tried first). Shapes below one use the boost
//! `Gamma(k) = Gamma(k + 1) * u^(1/k)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GammaSampler {
    shape: f64,
    scale: f64,
    d: f64,
    c: f64,
}

impl GammaSampler {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!(
                "gamma needs shape > 0 and scale > 0, got shape={shape} scale={scale}"
            )));
        }
        let boosted = if shape < 1.0 { shape + 1.0 } else { shape };
        let d = boosted - 1.0 / 3.0;
        Ok(Self {
            shape,
            scale,
            d,
            c: 1.0 / (9.0 * d).sqrt(),
        })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Unit-scale draw with shape `max(shape, 1)`-boosted parameters.
    fn standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            let t = 1.0 + self.c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            // (0, 1]
            let u = 1.0 - rng.random::<f64>();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return self.d * v;
            }
            if u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                return self.d * v;
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = self.standard(rng);
        let g = if self.shape < 1.0 {
            let u = 1.0 - rng.random::<f64>();
            g * u.powf(1.0 / self.shape)
        } else {
            g
        };
        g * self.scale
    }
}
