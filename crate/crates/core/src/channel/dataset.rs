use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use super::config::{ChannelFamily, NoiseDomain, ScenarioConfig};
use super::sim::{add_noise, sample_family};
use crate::rng::substream;
use crate::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub d: f64,
    pub p_r: f64,
}

/// Genuine `(d, p_r)` measurements with the metadata needed to regenerate them.
///
/// `n_per_d` is the generation count per grid distance; subsets produced by
/// splitting keep the generating dataset's value.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub n_per_d: usize,
}

/// Draws one noisy sample; `None` when the result is not representable
/// (non-positive after `+ scaling_coef`, or non-positive linear power).
fn draw<R: Rng + ?Sized>(scenario: &ScenarioConfig, d: f64, rng: &mut R) -> Result<Option<f64>> {
    let clean = sample_family(&scenario.family, d, rng)?;
    let noisy = match (&scenario.family, scenario.noise.domain) {
        (ChannelFamily::LogNormal(_), NoiseDomain::Linear) if scenario.noise.enabled => {
            let watts = add_noise(10f64.powf(clean / 10.0), &scenario.noise, rng);
            if watts <= 0.0 {
                return Ok(None);
            }
            10.0 * watts.log10()
        }
        _ => add_noise(clean, &scenario.noise, rng),
    };
    Ok((noisy + scenario.scaling_coef > 0.0).then_some(noisy))
}

/// Simulated measurement campaign: `n_per_d` noisy draws at every grid distance.
///
/// Distance `i` uses substream `i` of `seed`. Unrepresentable draws are
/// redrawn; more than 1% of rejections means `scaling_coef` is too small for
/// the scenario and is reported as a configuration error.
pub fn generate_dataset(scenario: &ScenarioConfig, n_per_d: usize, seed: u64) -> Result<Dataset> {
    scenario.validate()?;
    if n_per_d == 0 {
        return Err(Error::Size("n_per_d must be > 0".into()));
    }
    let total = n_per_d * scenario.distance_grid.len();
    let max_rejections = total / 100;
    let mut rejections = 0usize;
    let mut samples = Vec::with_capacity(total);
    for (i, &d) in scenario.distance_grid.iter().enumerate() {
        let mut rng = substream(seed, i as u64);
        for _ in 0..n_per_d {
            loop {
                if let Some(p_r) = draw(scenario, d, &mut rng)? {
                    samples.push(Sample { d, p_r });
                    break;
                }
                rejections += 1;
                if rejections > max_rejections {
                    return Err(Error::Config(format!(
                        "more than 1% of draws fall at or below -scaling_coef = {} for scenario {}; \
                         increase scaling_coef",
                        -scenario.scaling_coef, scenario.name
                    )));
                }
            }
        }
    }
    Ok(Dataset {
        samples,
        scenario: scenario.clone(),
        seed,
        n_per_d,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Received-power values grouped by grid distance, in grid order.
    pub fn by_distance(&self) -> Vec<(f64, Vec<f64>)> {
        let grid = &self.scenario.distance_grid;
        let mut groups: Vec<(f64, Vec<f64>)> = grid.iter().map(|&d| (d, Vec::new())).collect();
        for s in &self.samples {
            if let Some(i) = self.scenario.grid_index(s.d) {
                groups[i].1.push(s.p_r);
            }
        }
        groups
    }

    pub fn counts_per_distance(&self) -> Vec<usize> {
        self.by_distance().iter().map(|(_, v)| v.len()).collect()
    }

    /// A dataset sharing this one's metadata but holding `samples`.
    pub fn with_samples(&self, samples: Vec<Sample>) -> Dataset {
        Dataset {
            samples,
            scenario: self.scenario.clone(),
            seed: self.seed,
            n_per_d: self.n_per_d,
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * (self.samples.len() + 8));
        let scenario = serde_json::to_string(&self.scenario).expect("scenario serializes");
        let _ = writeln!(out, "# name={}", self.scenario.name);
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# n_per_d={}", self.n_per_d);
        let _ = writeln!(out, "# scaling_coef={}", self.scenario.scaling_coef);
        let _ = writeln!(out, "# version={DATASET_FORMAT_VERSION}");
        let _ = writeln!(out, "# scenario={scenario}");
        out.push_str("d,p_r\n");
        for s in &self.samples {
            let _ = writeln!(out, "{:.16e},{:.16e}", s.d, s.p_r);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path)
    }

    /// Parses the dataset format. `origin` is used only in error messages.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Dataset> {
        let err = |msg: String| Error::parse(origin, msg);
        let mut name = None;
        let mut seed = None;
        let mut n_per_d = None;
        let mut coef = None;
        let mut version = None;
        let mut scenario_json = None;
        let mut header_seen = false;
        let mut samples = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.trim().split_once('=') else {
                    continue;
                };
                let value = value.trim();
                match key.trim() {
                    "name" => name = Some(value.to_string()),
                    "seed" => seed = Some(value.parse::<u64>().map_err(|e| err(format!("seed: {e}")))?),
                    "n_per_d" => {
                        n_per_d = Some(value.parse::<usize>().map_err(|e| err(format!("n_per_d: {e}")))?)
                    }
                    "scaling_coef" => {
                        coef = Some(value.parse::<f64>().map_err(|e| err(format!("scaling_coef: {e}")))?)
                    }
                    "version" => {
                        version = Some(value.parse::<u32>().map_err(|e| err(format!("version: {e}")))?)
                    }
                    "scenario" => scenario_json = Some(value.to_string()),
                    _ => {}
                }
                continue;
            }
            if !header_seen {
                if line != "d,p_r" {
                    return Err(err(format!("line {}: expected header `d,p_r`", lineno + 1)));
                }
                header_seen = true;
                continue;
            }
            let (d, p) = line
                .split_once(',')
                .ok_or_else(|| err(format!("line {}: expected two columns", lineno + 1)))?;
            let d: f64 = d.trim().parse().map_err(|e| err(format!("line {}: {e}", lineno + 1)))?;
            let p_r: f64 = p.trim().parse().map_err(|e| err(format!("line {}: {e}", lineno + 1)))?;
            if !(d.is_finite() && p_r.is_finite()) {
                return Err(err(format!("line {}: non-finite value", lineno + 1)));
            }
            samples.push(Sample { d, p_r });
        }

        let version = version.ok_or_else(|| err("missing `# version=`".into()))?;
        if version != DATASET_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: DATASET_FORMAT_VERSION,
            });
        }
        if !header_seen {
            return Err(err("missing header `d,p_r`".into()));
        }
        let name = name.ok_or_else(|| err("missing `# name=`".into()))?;
        let seed = seed.ok_or_else(|| err("missing `# seed=`".into()))?;
        let n_per_d = n_per_d.ok_or_else(|| err("missing `# n_per_d=`".into()))?;
        let coef = coef.ok_or_else(|| err("missing `# scaling_coef=`".into()))?;

        let scenario = match scenario_json {
            Some(json) => serde_json::from_str::<ScenarioConfig>(&json)
                .map_err(|e| err(format!("scenario: {e}")))?,
            None => ScenarioConfig::builtin(&name)
                .ok_or_else(|| err(format!("unknown scenario `{name}` and no embedded scenario")))?,
        };
        scenario.validate()?;
        if scenario.name != name {
            return Err(err(format!("name `{name}` disagrees with embedded scenario `{}`", scenario.name)));
        }
        if scenario.scaling_coef != coef {
            return Err(err(format!(
                "scaling_coef {coef} disagrees with scenario value {}",
                scenario.scaling_coef
            )));
        }
        if let Some(s) = samples.iter().find(|s| scenario.grid_index(s.d).is_none()) {
            return Err(err(format!("distance {} is not on the {name} grid", s.d)));
        }
        Ok(Dataset {
            samples,
            scenario,
            seed,
            n_per_d,
        })
    }
}
