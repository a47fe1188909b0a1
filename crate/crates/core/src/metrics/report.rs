use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kde::{overlap_curves, KdeConfig};
use super::stats::{mean, moa, percent_error, sample_stats, scaled_pe};
use crate::channel::{analytic_moments, Dataset};
use crate::datapipe::{inverse_scale, log_scale, normalize_distance, DistanceGroup};
use crate::mdn::{mixture_at, ModelMeta, NetworkWeights};
use crate::rng::substream;
use crate::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// `n` draws from the model's mixture at `d_norm`, in scaled units.
pub fn generate_scaled<R: Rng + ?Sized>(
    w: &NetworkWeights,
    d_norm: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mix = mixture_at(w, d_norm)?;
    Ok((0..n).map(|_| mix.sample(rng)).collect())
}

/// Per-distance OA between scaled genuine groups and an equal number of
/// model draws; group `i` draws from substream `i` of `seed`.
pub fn oa_by_distance(
    w: &NetworkWeights,
    groups: &[DistanceGroup],
    cfg: &KdeConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let generated = generate_scaled(w, g.d_norm, g.values.len(), &mut substream(seed, i as u64))?;
            Ok(overlap_curves(&g.values, &generated, cfg)?.oa)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub d: f64,
    pub n_genuine: usize,
    pub n_generated: usize,
    /// Overlapped Area in the scaled (log) domain.
    pub oa: f64,
    /// Raw-domain moments of the generated samples.
    pub generated_mean: f64,
    pub generated_var: Option<f64>,
    /// Analytic moments of the noisy channel at `d`.
    pub ideal_mean: Option<f64>,
    pub ideal_var: Option<f64>,
    pub pe_mean: Option<f64>,
    pub pe_var: Option<f64>,
}

/// One distance of an evaluation, with the samples behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEval {
    pub report: DistanceReport,
    pub genuine_scaled: Vec<f64>,
    pub generated_scaled: Vec<f64>,
    pub xs: Vec<f64>,
    pub kde_genuine: Vec<f64>,
    pub kde_generated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub kde: KdeConfig,
    pub oa_domain: String,
    pub pe_domain: String,
    pub moa_coef: f64,
    pub n_generated_per_d: usize,
    pub per_d: Vec<DistanceReport>,
    pub average_oa: f64,
    pub oa_std: f64,
    pub moa: f64,
    pub pe_mean_avg: Option<f64>,
    pub pe_var_avg: Option<f64>,
    pub scaled_pe: Option<f64>,
}

impl EvalReport {
    pub fn per_d_oa(&self) -> Vec<(f64, f64)> {
        self.per_d.iter().map(|r| (r.d, r.oa)).collect()
    }

    pub fn oa_at(&self, d: f64) -> Option<f64> {
        self.per_d.iter().find(|r| r.d == d).map(|r| r.oa)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)
            .map_err(|e| Error::parse("<report>", e.to_string()))?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: report.format_version,
                expected: REPORT_FORMAT_VERSION,
            });
        }
        Ok(report)
    }

    /// `d,oa,pe_mean,pe_var`; undefined percent errors are left empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let mut out = String::from("d,oa,pe_mean,pe_var\n");
        for r in &self.per_d {
            let _ = writeln!(out, "{:.16e},{:.16e},{},{}", r.d, r.oa, opt(r.pe_mean), opt(r.pe_var));
        }
        out
    }
}

fn check_meta(meta: &ModelMeta, genuine: &Dataset) -> Result<()> {
    let sc = &genuine.scenario;
    if meta.scaling_coef != sc.scaling_coef || meta.d_max != sc.d_max() {
        return Err(Error::Mismatch(format!(
            "model `{}` (scaling_coef {}, d_max {}) cannot be evaluated on `{}` data (scaling_coef {}, d_max {})",
            meta.scenario,
            meta.scaling_coef,
            meta.d_max,
            sc.name,
            sc.scaling_coef,
            sc.d_max()
        )));
    }
    Ok(())
}

/// Evaluates one grid distance: model draws (as many as genuine samples) from
/// substream `grid index` of `seed`, scaled-domain OA, raw-domain moments and
/// percent errors against the analytic channel moments.
pub fn evaluate_distance(
    w: &NetworkWeights,
    meta: &ModelMeta,
    genuine: &Dataset,
    d: f64,
    cfg: &KdeConfig,
    seed: u64,
) -> Result<DistanceEval> {
    check_meta(meta, genuine)?;
    let scenario = &genuine.scenario;
    let index = scenario
        .grid_index(d)
        .ok_or_else(|| Error::Domain(format!("distance {d} is not on the {} grid", scenario.name)))?;
    let d = scenario.distance_grid[index];
    let coef = scenario.scaling_coef;
    let raw: Vec<f64> = genuine.samples.iter().filter(|s| s.d == d).map(|s| s.p_r).collect();
    if raw.is_empty() {
        return Err(Error::Domain(format!("no genuine samples at d = {d}")));
    }
    let genuine_scaled = raw.iter().map(|&x| log_scale(x, coef)).collect::<Result<Vec<_>>>()?;
    let d_norm = normalize_distance(d, scenario.d_max())?;
    let generated_scaled = generate_scaled(w, d_norm, raw.len(), &mut substream(seed, index as u64))?;
    let curves = overlap_curves(&genuine_scaled, &generated_scaled, cfg)?;

    let generated_raw: Vec<f64> = generated_scaled.iter().map(|&s| inverse_scale(s, coef)).collect();
    let generated_mean = mean(&generated_raw)?;
    let generated_var = sample_stats(&generated_raw).ok().map(|(_, v)| v);
    let ideal = analytic_moments(scenario, d).ok();
    let pe_mean = ideal.and_then(|m| percent_error(m.mean, generated_mean).ok());
    let pe_var = match (ideal, generated_var) {
        (Some(m), Some(v)) => percent_error(m.var, v).ok(),
        _ => None,
    };
    Ok(DistanceEval {
        report: DistanceReport {
            d,
            n_genuine: raw.len(),
            n_generated: generated_scaled.len(),
            oa: curves.oa,
            generated_mean,
            generated_var,
            ideal_mean: ideal.map(|m| m.mean),
            ideal_var: ideal.map(|m| m.var),
            pe_mean,
            pe_var,
        },
        genuine_scaled,
        generated_scaled,
        xs: curves.xs,
        kde_genuine: curves.genuine,
        kde_generated: curves.generated,
    })
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    mean(&defined).ok()
}

/// Full evaluation of a model against a genuine dataset.
pub fn evaluate(
    w: &NetworkWeights,
    meta: &ModelMeta,
    genuine: &Dataset,
    cfg: &KdeConfig,
    moa_coef: f64,
    seed: u64,
) -> Result<EvalReport> {
    check_meta(meta, genuine)?;
    cfg.validate()?;
    let mut per_d = Vec::new();
    for (d, values) in genuine.by_distance() {
        if values.is_empty() {
            continue;
        }
        per_d.push(evaluate_distance(w, meta, genuine, d, cfg, seed)?.report);
    }
    if per_d.is_empty() {
        return Err(Error::Domain("genuine dataset has no samples".into()));
    }
    let oas: Vec<f64> = per_d.iter().map(|r| r.oa).collect();
    let average_oa = mean(&oas)?;
    let oa_std = sample_stats(&oas).map(|(_, v)| v.sqrt()).unwrap_or(0.0);
    let pe_mean_avg = mean_defined(per_d.iter().map(|r| r.pe_mean));
    let pe_var_avg = mean_defined(per_d.iter().map(|r| r.pe_var));
    let scaled = match (pe_mean_avg, pe_var_avg) {
        (Some(a), Some(b)) => Some(scaled_pe(a, b)),
        _ => None,
    };
    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        scenario: genuine.scenario.name.clone(),
        seed,
        kde: *cfg,
        oa_domain: "scaled".into(),
        pe_domain: "raw".into(),
        moa_coef,
        n_generated_per_d: per_d.iter().map(|r| r.n_generated).min().unwrap_or(0),
        average_oa,
        oa_std,
        moa: moa(&oas, moa_coef)?,
        per_d,
        pe_mean_avg,
        pe_var_avg,
        scaled_pe: scaled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, ScenarioConfig};
    use crate::mdn::{init_weights, Architecture};

    #[test]
    fn untrained_model_scores_low() {
        let s = ScenarioConfig::n1();
        let ds = generate_dataset(&s, 200, 1).unwrap();
        let w = init_weights(Architecture::default(), 3).unwrap();
        let meta = ModelMeta::for_scenario(&s, 3);
        let r = evaluate(&w, &meta, &ds, &KdeConfig::default(), 2.0, 9).unwrap();
        assert_eq!(r.per_d.len(), 30);
        assert!(r.average_oa < 0.5, "{}", r.average_oa);
        assert!(r.moa <= r.average_oa);
        assert!(r.per_d.iter().all(|p| (0.0..=1.0).contains(&p.oa)));
        assert_eq!(r, evaluate(&w, &meta, &ds, &KdeConfig::default(), 2.0, 9).unwrap());
        let back = EvalReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.to_csv().lines().count(), 31);
    }

    #[test]
    fn mismatched_scenarios_are_rejected() {
        let ln = generate_dataset(&ScenarioConfig::ln1(), 5, 1).unwrap();
        let w = init_weights(Architecture::new(2, 4, 2), 3).unwrap();
        let meta = ModelMeta::for_scenario(&ScenarioConfig::n1(), 3);
        assert!(matches!(
            evaluate(&w, &meta, &ln, &KdeConfig::default(), 2.0, 0),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn distance_eval_agrees_with_report() {
        let s = ScenarioConfig::n1();
        let ds = generate_dataset(&s, 50, 2).unwrap();
        let w = init_weights(Architecture::new(2, 8, 2), 3).unwrap();
        let meta = ModelMeta::for_scenario(&s, 3);
        let cfg = KdeConfig::default();
        let full = evaluate(&w, &meta, &ds, &cfg, 2.0, 5).unwrap();
        let one = evaluate_distance(&w, &meta, &ds, 250.0, &cfg, 5).unwrap();
        assert_eq!(full.oa_at(250.0), Some(one.report.oa));
        assert!(evaluate_distance(&w, &meta, &ds, 255.0, &cfg, 5).is_err());
    }
}
