use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use super::network::SigmaActivation;
use crate::{Error, Result};

pub const SIGMA_FLOOR: f64 = 1e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Head output split into its three per-component vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RawOutput {
    pub alpha_logits: Vec<f64>,
    pub mu_raw: Vec<f64>,
    pub sigma_raw: Vec<f64>,
}

impl RawOutput {
    /// Splits `[alpha logits | mu | sigma raw]`.
    pub fn from_slice(z: &[f64], m_c: usize) -> Self {
        assert_eq!(z.len(), 3 * m_c, "head output has wrong length");
        Self {
            alpha_logits: z[..m_c].to_vec(),
            mu_raw: z[m_c..2 * m_c].to_vec(),
            sigma_raw: z[2 * m_c..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub alphas: Vec<f64>,
    pub mus: Vec<f64>,
    pub sigmas: Vec<f64>,
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(sigma, d sigma / d raw)`.
pub(crate) fn sigma_transform(raw: f64, act: SigmaActivation) -> (f64, f64) {
    match act {
        SigmaActivation::Softplus => (softplus(raw) + SIGMA_FLOOR, sigmoid(raw)),
        SigmaActivation::Exp => {
            let e = raw.exp();
            (e + SIGMA_FLOOR, e)
        }
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Max-subtracted softmax for the weights, identity for the means, and the
/// configured positive transform for the widths.
pub fn to_mixture(raw: &RawOutput, act: SigmaActivation) -> MixtureParams {
    let max = raw.alpha_logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.alpha_logits.iter().map(|a| (a - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    MixtureParams {
        alphas: exps.iter().map(|e| e / total).collect(),
        mus: raw.mu_raw.clone(),
        sigmas: raw.sigma_raw.iter().map(|&r| sigma_transform(r, act).0).collect(),
    }
}

impl MixtureParams {
    /// Validated constructor for hand-built mixtures.
    pub fn new(alphas: Vec<f64>, mus: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let m = alphas.len();
        if m == 0 || mus.len() != m || sigmas.len() != m {
            return Err(Error::Config(format!(
                "mixture vectors must be non-empty and equally long, got {}/{}/{}",
                m,
                mus.len(),
                sigmas.len()
            )));
        }
        let sum: f64 = alphas.iter().sum();
        if alphas.iter().any(|a| !(*a >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights must lie on the simplex (sum {sum})")));
        }
        if mus.iter().any(|m| !m.is_finite()) || sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("means must be finite and widths positive".into()));
        }
        Ok(Self { alphas, mus, sigmas })
    }

    pub fn components(&self) -> usize {
        self.alphas.len()
    }

    fn terms(&self, x: f64) -> Vec<f64> {
        self.alphas
            .iter()
            .zip(&self.mus)
            .zip(&self.sigmas)
            .map(|((a, m), s)| {
                let z = (x - m) / s;
                a.ln() - LN_SQRT_2PI - s.ln() - 0.5 * z * z
            })
            .collect()
    }

    /// Log density via log-sum-exp over the components.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        log_sum_exp(&self.terms(x))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.alphas
            .iter()
            .zip(&self.mus)
            .zip(&self.sigmas)
            .map(|((a, m), s)| {
                let z = (x - m) / s;
                a * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            })
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.alphas
            .iter()
            .zip(&self.mus)
            .zip(&self.sigmas)
            .map(|((a, m), s)| a * 0.5 * erfc(-(x - m) / (s * std::f64::consts::SQRT_2)))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Component by inverse-CDF on the weights, then a Gaussian draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.alphas.len() - 1;
        for (i, a) in self.alphas.iter().enumerate() {
            acc += a;
            if u < acc {
                pick = i;
                break;
            }
        }
        // Rounding can leave `acc < 1`; never fall onto a zero-weight tail.
        while self.alphas[pick] == 0.0 && pick > 0 {
            pick -= 1;
        }
        let z: f64 = rng.sample(StandardNormal);
        self.mus[pick] + self.sigmas[pick] * z
    }
}

pub fn mixture_pdf(p: &MixtureParams, x: f64) -> f64 {
    p.pdf(x)
}

pub fn mixture_cdf(p: &MixtureParams, x: f64) -> f64 {
    p.cdf(x)
}

pub fn sample_mixture<R: Rng + ?Sized>(p: &MixtureParams, rng: &mut R) -> f64 {
    p.sample(rng)
}
