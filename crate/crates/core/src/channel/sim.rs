use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use super::config::{ChannelFamily, LogNormalConfig, NakagamiConfig, NoiseConfig, ScenarioConfig};
use super::gamma::GammaSampler;
use crate::{Error, Result};

fn check_distance(d: f64) -> Result<()> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("distance must be > 0, got {d}")))
    }
}

/// Mean received power `Ω(d) = p_t · eta · (d0/d)^alpha` in scaled units.
pub fn path_loss_nakagami(cfg: &NakagamiConfig, d: f64) -> Result<f64> {
    check_distance(d)?;
    Ok(cfg.p_t * cfg.eta * (cfg.d0 / d).powf(cfg.alpha))
}

pub fn nakagami_m(cfg: &NakagamiConfig, d: f64) -> f64 {
    if d <= cfg.d_break {
        cfg.m_near
    } else {
        cfg.m_far
    }
}

/// One Nakagami-m amplitude: `sqrt(G)` with `G ~ Gamma(m, Ω/m)`.
pub fn sample_nakagami<R: Rng + ?Sized>(cfg: &NakagamiConfig, d: f64, rng: &mut R) -> Result<f64> {
    let omega = path_loss_nakagami(cfg, d)?;
    let m = nakagami_m(cfg, d);
    Ok(GammaSampler::new(m, omega / m)?.sample(rng).sqrt())
}

/// Free-space reference power `10 log10(p_t · eta / d0²)` in dB.
pub fn p_db_reference(cfg: &LogNormalConfig) -> Result<f64> {
    let arg = cfg.p_t * cfg.eta / (cfg.d0 * cfg.d0);
    if !(arg.is_finite() && arg > 0.0) {
        return Err(Error::Config(format!(
            "free-space reference needs p_t·eta/d0² > 0, got {arg}"
        )));
    }
    Ok(10.0 * arg.log10())
}

/// Deterministic dual-slope mean power in dB.
pub fn p_db_mean(cfg: &LogNormalConfig, d: f64) -> Result<f64> {
    if !(d.is_finite() && d >= cfg.d0) {
        return Err(Error::Domain(format!("log-normal distance must be >= d0 = {}, got {d}", cfg.d0)));
    }
    let p0 = p_db_reference(cfg)?;
    Ok(if d <= cfg.dc {
        p0 - 10.0 * cfg.alpha1 * (d / cfg.d0).log10()
    } else {
        p0 - 10.0 * cfg.alpha1 * (cfg.dc / cfg.d0).log10() - 10.0 * cfg.alpha2 * (d / cfg.dc).log10()
    })
}

/// Shadowing standard deviation (dB) in effect at `d`.
pub fn shadowing_std(cfg: &LogNormalConfig, d: f64) -> f64 {
    if d <= cfg.dc {
        cfg.delta1
    } else {
        cfg.delta2
    }
}

pub fn sample_lognormal<R: Rng + ?Sized>(cfg: &LogNormalConfig, d: f64, rng: &mut R) -> Result<f64> {
    let mean = p_db_mean(cfg, d)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + shadowing_std(cfg, d) * z)
}

/// Noise-free draw from the scenario's channel family at `d`.
pub fn sample_family<R: Rng + ?Sized>(family: &ChannelFamily, d: f64, rng: &mut R) -> Result<f64> {
    match family {
        ChannelFamily::Nakagami(c) => sample_nakagami(c, d, rng),
        ChannelFamily::LogNormal(c) => sample_lognormal(c, d, rng),
    }
}

/// `x + N`, `N ~ Normal(mean, var)`. Identity when disabled or degenerate.
pub fn add_noise<R: Rng + ?Sized>(x: f64, noise: &NoiseConfig, rng: &mut R) -> f64 {
    let (mean, var) = noise.effective();
    if var == 0.0 {
        return x + mean;
    }
    let z: f64 = rng.sample(StandardNormal);
    x + mean + var.sqrt() * z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
}

/// Mean and variance of the genuine (noisy) distribution at a grid distance.
///
/// Shadowing or fading and the additive noise are independent, so their
/// moments add.
pub fn analytic_moments(scenario: &ScenarioConfig, d: f64) -> Result<Moments> {
    if scenario.grid_index(d).is_none() {
        return Err(Error::Domain(format!(
            "distance {d} is not on the {} grid",
            scenario.name
        )));
    }
    let (n_mean, n_var) = scenario.noise.effective();
    match &scenario.family {
        ChannelFamily::Nakagami(c) => {
            let omega = path_loss_nakagami(c, d)?;
            let m = nakagami_m(c, d);
            let ratio = (ln_gamma(m + 0.5) - ln_gamma(m)).exp();
            Ok(Moments {
                mean: ratio * (omega / m).sqrt() + n_mean,
                var: omega * (1.0 - ratio * ratio / m) + n_var,
            })
        }
        ChannelFamily::LogNormal(c) => {
            if scenario.noise.enabled && scenario.noise.domain == super::NoiseDomain::Linear {
                return Err(Error::Config(
                    "closed-form moments are unavailable for linear-domain noise on a log-normal channel"
                        .into(),
                ));
            }
            let delta = shadowing_std(c, d);
            Ok(Moments {
                mean: p_db_mean(c, d)? + n_mean,
                var: delta * delta + n_var,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NoiseDomain;
    use crate::rng::rng_from_seed;

    fn n1() -> NakagamiConfig {
        match ScenarioConfig::n1().family {
            ChannelFamily::Nakagami(c) => c,
            _ => unreachable!(),
        }
    }

    fn n2() -> NakagamiConfig {
        match ScenarioConfig::n2().family {
            ChannelFamily::Nakagami(c) => c,
            _ => unreachable!(),
        }
    }

    fn ln(s: ScenarioConfig) -> LogNormalConfig {
        match s.family {
            ChannelFamily::LogNormal(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn nakagami_path_loss_values() {
        let c = n1();
        // 0.28183815 * 7.29 * (100/d)^2
        assert!((path_loss_nakagami(&c, 100.0).unwrap() - 2.054_600_113_5).abs() < 1e-9);
        assert!((path_loss_nakagami(&c, 200.0).unwrap() - 0.513_650_028_375).abs() < 1e-9);
        assert_eq!(path_loss_nakagami(&c, c.d0).unwrap(), c.p_t * c.eta);
        assert!(matches!(path_loss_nakagami(&c, 0.0), Err(Error::Domain(_))));
        assert!(path_loss_nakagami(&c, -5.0).is_err());
    }

    #[test]
    fn path_loss_strictly_decreasing() {
        let c = n2();
        let v: Vec<f64> = (1..=300).map(|d| path_loss_nakagami(&c, f64::from(d)).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn fading_parameter_breakpoint() {
        assert_eq!(nakagami_m(&n1(), 140.0), 2.0);
        assert_eq!(nakagami_m(&n1(), 141.0), 1.0);
        assert_eq!(nakagami_m(&n2(), 100.0), 1.5);
    }

    #[test]
    fn nakagami_power_mean() {
        let c = n1();
        let mut rng = rng_from_seed(1);
        let n = 1_000_000;
        let omega = 2.054_600_113_5;
        let mean = (0..n).map(|_| sample_nakagami(&c, 100.0, &mut rng).unwrap().powi(2)).sum::<f64>() / n as f64;
        assert!((mean - omega).abs() < 3.0 * omega / (2.0 * n as f64).sqrt());
    }

    #[test]
    fn rayleigh_power_is_exponential() {
        // m = 1 beyond the breakpoint: x² ~ Exp(Ω); P(x² > Ω) = 1/e.
        let c = n1();
        let omega = path_loss_nakagami(&c, 200.0).unwrap();
        let mut rng = rng_from_seed(2);
        let n = 200_000;
        let above = (0..n)
            .filter(|_| sample_nakagami(&c, 200.0, &mut rng).unwrap().powi(2) > omega)
            .count() as f64
            / n as f64;
        let p = (-1.0f64).exp();
        assert!((above - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn reference_power() {
        let v1 = p_db_reference(&ln(ScenarioConfig::ln1())).unwrap();
        assert!((v1 - (-96.872_726_922_306_27)).abs() < 1e-9);
        let v2 = p_db_reference(&ln(ScenarioConfig::ln2())).unwrap();
        assert_eq!(v1, v2);
        let unit = LogNormalConfig {
            p_t: 2.0,
            eta: 0.5,
            ..ln(ScenarioConfig::ln1())
        };
        assert_eq!(p_db_reference(&unit).unwrap(), 0.0);
        let bad = LogNormalConfig {
            eta: 0.0,
            ..ln(ScenarioConfig::ln1())
        };
        assert!(matches!(p_db_reference(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn dual_slope_mean() {
        let c = ln(ScenarioConfig::ln1());
        let at_dc = p_db_mean(&c, 102.0).unwrap();
        assert!((at_dc - (-148.292_891_319_411_35)).abs() < 1e-9);
        let far = p_db_mean(&c, 250.0).unwrap();
        assert!((far - (at_dc - 63.4 * (250.0f64 / 102.0).log10())).abs() < 1e-9);
        assert!((far - (-172.977)).abs() < 5e-4);
        assert!(matches!(p_db_mean(&c, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn dual_slope_is_continuous() {
        for c in [ln(ScenarioConfig::ln1()), ln(ScenarioConfig::ln2())] {
            let p0 = p_db_reference(&c).unwrap();
            let near = p0 - 10.0 * c.alpha1 * (c.dc / c.d0).log10();
            let far = p0 - 10.0 * c.alpha1 * (c.dc / c.d0).log10() - 10.0 * c.alpha2 * (c.dc / c.dc).log10();
            assert!((near - far).abs() < 1e-12);
            let left = p_db_mean(&c, c.dc).unwrap();
            let right = p_db_mean(&c, c.dc * (1.0 + 1e-12)).unwrap();
            assert!((left - right).abs() < 1e-9);
        }
    }

    #[test]
    fn lognormal_sampling_moments() {
        let c = ln(ScenarioConfig::ln1());
        let mut rng = rng_from_seed(5);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_lognormal(&c, 250.0, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let target = p_db_mean(&c, 250.0).unwrap();
        assert!((mean - target).abs() < 3.0 * 5.2 / (n as f64).sqrt());
        assert!((std - 5.2).abs() < 0.03 * 5.2);
    }

    #[test]
    fn degenerate_shadowing_returns_mean() {
        let c = LogNormalConfig {
            delta1: 1e-300,
            delta2: 1e-300,
            ..ln(ScenarioConfig::ln1())
        };
        let mut rng = rng_from_seed(6);
        let mean = p_db_mean(&c, 250.0).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_lognormal(&c, 250.0, &mut rng).unwrap(), mean);
        }
    }

    #[test]
    fn noise_identity_cases() {
        let mut rng = rng_from_seed(7);
        let off = NoiseConfig {
            enabled: false,
            ..NoiseConfig::gaussian(3.0, 2.0)
        };
        assert_eq!(add_noise(1.25, &off, &mut rng), 1.25);
        assert_eq!(add_noise(5.0, &NoiseConfig::gaussian(0.0, 0.0), &mut rng), 5.0);
    }

    #[test]
    fn noise_mean() {
        let noise = NoiseConfig::gaussian(0.1256, 0.1);
        let mut rng = rng_from_seed(8);
        let n = 1_000_000;
        let mean = (0..n).map(|_| add_noise(0.0, &noise, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.1256).abs() < 3.0 * (0.1 / n as f64).sqrt());
    }

    #[test]
    fn rayleigh_closed_form_moments() {
        let mut s = ScenarioConfig::n1();
        s.noise = NoiseConfig::disabled();
        if let ChannelFamily::Nakagami(c) = &mut s.family {
            // Ω(100) = p_t·eta = 1, m = 1 everywhere.
            c.p_t = 1.0;
            c.eta = 1.0;
            c.m_near = 1.0;
        }
        let m = analytic_moments(&s, 100.0).unwrap();
        assert!((m.mean - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
        assert!((m.var - (1.0 - std::f64::consts::FRAC_PI_4)).abs() < 1e-12);
    }

    #[test]
    fn n1_moments_with_noise() {
        let s = ScenarioConfig::n1();
        let m = analytic_moments(&s, 100.0).unwrap();
        let omega = 2.054_600_113_5;
        // Γ(2.5)/Γ(2) = 3√π/4
        let ratio = 0.75 * std::f64::consts::PI.sqrt();
        assert!((m.var - (omega * (1.0 - ratio * ratio / 2.0) + 0.1)).abs() < 1e-9);
        assert!((m.mean - (ratio * (omega / 2.0).sqrt() + 0.1256)).abs() < 1e-9);
        assert!(matches!(analytic_moments(&s, 105.0), Err(Error::Domain(_))));
    }

    #[test]
    fn ln1_moments_without_noise() {
        let m = analytic_moments(&ScenarioConfig::ln1(), 250.0).unwrap();
        assert!((m.mean - (-172.977)).abs() < 5e-4);
        assert!((m.var - 27.04).abs() < 1e-9);

        let mut linear = ScenarioConfig::ln1();
        linear.noise = NoiseConfig {
            domain: NoiseDomain::Linear,
            ..NoiseConfig::gaussian(1e-18, 1e-36)
        };
        assert!(matches!(analytic_moments(&linear, 250.0), Err(Error::Config(_))));
    }
}
