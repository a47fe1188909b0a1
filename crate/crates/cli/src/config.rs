//! Flag/file merging and the fully resolved per-command settings that go
//! into manifests.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dmdn::channel::{NoiseDomain, ScenarioConfig};
use dmdn::datapipe::SplitSpec;
use dmdn::mdn::{Architecture, SigmaActivation};
use dmdn::metrics::{BandwidthRule, KdeConfig};
use dmdn::rng::derive_seed;
use dmdn::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::args::{
    DomainArg, EvalArgs, FileConfig, GenerateArgs, KdeArgs, PlotArgs, RuleArg, SigmaArg, TrainArgs, TransferArgs,
};

/// Reference data size and batch of the full-size recipe; desk-scale
/// batches keep its number of optimizer steps per epoch.
pub const REFERENCE_TRAIN: usize = 216_000;
pub const REFERENCE_BATCH: usize = 10_000;
pub const PAPER_SPLIT: (usize, usize, usize) = (216_000, 100_000, 100_000);
pub const DESK_SPLIT: (usize, usize, usize) = (60_000, 30_000, 30_000);
pub const DESK_N_PER_D: usize = 2000;

const SEED_SPLIT: u64 = 1;
const SEED_EVAL: u64 = 2;

pub fn read_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut unknown = Vec::new();
    let de = toml::Deserializer::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let cfg: FileConfig = serde_ignored::deserialize(de, |p| unknown.push(p.to_string()))
        .with_context(|| format!("parsing config {}", path.display()))?;
    if !unknown.is_empty() {
        bail!("unknown keys in config {}: {}", path.display(), unknown.join(", "));
    }
    Ok(cfg)
}

/// Global options after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub paper_scale: bool,
}

/// Absolute form of a path so manifests replay from any directory.
pub fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))
}

pub fn desk_batch(n_train: usize) -> usize {
    (n_train * REFERENCE_BATCH).div_ceil(REFERENCE_TRAIN).max(1)
}

fn kde_config(a: &KdeArgs) -> Result<(KdeConfig, f64)> {
    let mut kde = KdeConfig::default();
    if let Some(b) = a.bandwidth {
        kde.bandwidth = b;
    }
    if let Some(g) = a.grid_divisor {
        kde.grid_divisor = g;
    }
    if let Some(r) = a.bandwidth_rule {
        kde.rule = match r {
            RuleArg::Relative => BandwidthRule::Relative,
            RuleArg::Absolute => BandwidthRule::Absolute,
        };
    }
    kde.validate()?;
    Ok((kde, a.moa_coef.unwrap_or(2.0)))
}

pub fn merge_kde(flags: &KdeArgs, file: &KdeArgs) -> KdeArgs {
    KdeArgs {
        bandwidth: flags.bandwidth.or(file.bandwidth),
        bandwidth_rule: flags.bandwidth_rule.or(file.bandwidth_rule),
        grid_divisor: flags.grid_divisor.or(file.grid_divisor),
        moa_coef: flags.moa_coef.or(file.moa_coef),
    }
}

pub fn merge_generate(flags: &GenerateArgs, file: &GenerateArgs) -> GenerateArgs {
    GenerateArgs {
        scenario: flags.scenario.clone().or_else(|| file.scenario.clone()),
        scenario_file: flags.scenario_file.clone().or_else(|| file.scenario_file.clone()),
        n_per_d: flags.n_per_d.or(file.n_per_d),
        noise_mean: flags.noise_mean.or(file.noise_mean),
        noise_var: flags.noise_var.or(file.noise_var),
        noise_domain: flags.noise_domain.or(file.noise_domain),
        no_noise: flags.no_noise || file.no_noise,
    }
}

pub fn merge_transfer(flags: &TransferArgs, file: &TransferArgs) -> TransferArgs {
    TransferArgs {
        model: flags.model.clone().or_else(|| file.model.clone()),
        reset_optimizer: flags.reset_optimizer || file.reset_optimizer,
        train: merge_train(&flags.train, &file.train),
    }
}

pub fn merge_eval(flags: &EvalArgs, file: &EvalArgs) -> EvalArgs {
    EvalArgs {
        model: flags.model.clone().or_else(|| file.model.clone()),
        data: flags.data.clone().or_else(|| file.data.clone()),
        kde: merge_kde(&flags.kde, &file.kde),
    }
}

pub fn merge_plot(flags: &PlotArgs, file: &PlotArgs) -> PlotArgs {
    // --model and --reference are alternatives; a flag for one drops the
    // file's value for the other.
    let (model, reference) = if flags.model.is_some() || flags.reference.is_some() {
        (flags.model.clone(), flags.reference.clone())
    } else {
        (file.model.clone(), file.reference.clone())
    };
    PlotArgs {
        model,
        reference,
        data: flags.data.clone().or_else(|| file.data.clone()),
        d: flags.d.or(file.d),
        kde: merge_kde(&flags.kde, &file.kde),
    }
}

pub fn merge_train(flags: &TrainArgs, file: &TrainArgs) -> TrainArgs {
    TrainArgs {
        data: flags.data.clone().or_else(|| file.data.clone()),
        epochs: flags.epochs.or(file.epochs),
        iterations: flags.iterations.or(file.iterations),
        batch: flags.batch.or(file.batch),
        lr: flags.lr.or(file.lr),
        max_nan_restarts: flags.max_nan_restarts.or(file.max_nan_restarts),
        n_train: flags.n_train.or(file.n_train),
        n_val: flags.n_val.or(file.n_val),
        n_test: flags.n_test.or(file.n_test),
        layers: flags.layers.or(file.layers),
        units: flags.units.or(file.units),
        components: flags.components.or(file.components),
        sigma_activation: flags.sigma_activation.or(file.sigma_activation),
        no_standardize: flags.no_standardize || file.no_standardize,
        no_optimizer_state: flags.no_optimizer_state || file.no_optimizer_state,
        poison_init: flags.poison_init || file.poison_init,
        kde: merge_kde(&flags.kde, &file.kde),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSettings {
    pub scenario: ScenarioConfig,
    pub n_per_d: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn load_scenario_file(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
    let sc: ScenarioConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))?
    };
    Ok(sc)
}

pub fn resolve_generate(a: &GenerateArgs, g: &Globals) -> Result<GenerateSettings> {
    let mut scenario = match (&a.scenario, &a.scenario_file) {
        (Some(_), Some(_)) => bail!("give either --scenario or --scenario-file, not both"),
        (Some(name), None) => ScenarioConfig::builtin(name)
            .with_context(|| format!("unknown scenario {name:?}; built-ins are n1, n2, ln1, ln2"))?,
        (None, Some(path)) => load_scenario_file(path)?,
        (None, None) => bail!("generate needs --scenario or --scenario-file"),
    };
    if let Some(m) = a.noise_mean {
        scenario.noise.mean = m;
        scenario.noise.enabled = true;
    }
    if let Some(v) = a.noise_var {
        scenario.noise.var = v;
        scenario.noise.enabled = true;
    }
    if let Some(dm) = a.noise_domain {
        scenario.noise.domain = match dm {
            DomainArg::Native => NoiseDomain::Native,
            DomainArg::Linear => NoiseDomain::Linear,
        };
    }
    if a.no_noise {
        scenario.noise.enabled = false;
    }
    scenario.validate()?;
    let n_per_d = match a.n_per_d {
        Some(n) => n,
        None if g.paper_scale => {
            let total = PAPER_SPLIT.0 + PAPER_SPLIT.1 + PAPER_SPLIT.2;
            total.div_ceil(scenario.distance_grid.len())
        }
        None => DESK_N_PER_D,
    };
    let out = absolute(g.out.as_deref().context("generate needs --out <file>")?)?;
    Ok(GenerateSettings {
        scenario,
        n_per_d,
        seed: g.seed,
        out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub data: PathBuf,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub eval_kde: KdeConfig,
    pub eval_seed: u64,
    pub poison_init: bool,
    pub out: PathBuf,
}

/// Resolves training settings; split sizes depend on the dataset size when
/// not given.
pub fn resolve_train(a: &TrainArgs, g: &Globals, n_data: usize) -> Result<TrainSettings> {
    let data = absolute(a.data.as_deref().context("missing --data <dataset.csv>")?)?;
    let out = absolute(g.out.as_deref().context("missing --out <directory>")?)?;
    let epochs = a.epochs.unwrap_or(15);
    let split_seed = derive_seed(g.seed, &[SEED_SPLIT]);
    let (n_train, n_val, n_test) = match (a.n_train, a.n_val, a.n_test) {
        (Some(t), Some(v), Some(s)) => (t, v, s),
        (None, None, None) => {
            let preferred = if g.paper_scale { PAPER_SPLIT } else { DESK_SPLIT };
            if preferred.0 + preferred.1 + preferred.2 <= n_data {
                preferred
            } else {
                let p = SplitSpec::proportional(n_data, split_seed);
                (p.n_train, p.n_val, p.n_test)
            }
        }
        _ => bail!("give all of --n-train, --n-val and --n-test, or none"),
    };
    let split = SplitSpec {
        n_train,
        n_val,
        n_test,
        seed: split_seed,
    };
    let batch_size = a.batch.unwrap_or(if g.paper_scale {
        REFERENCE_BATCH
    } else {
        desk_batch(n_train)
    });
    let defaults = TrainConfig::default();
    let mut arch = Architecture::default();
    if let Some(l) = a.layers {
        arch.num_layers = l;
    }
    if let Some(u) = a.units {
        arch.num_units = u;
    }
    if let Some(m) = a.components {
        arch.m_c = m;
    }
    if let Some(s) = a.sigma_activation {
        arch.sigma_activation = match s {
            SigmaArg::Softplus => SigmaActivation::Softplus,
            SigmaArg::Exp => SigmaActivation::Exp,
        };
    }
    let (kde, moa_coef) = kde_config(&a.kde)?;
    let train = TrainConfig {
        epochs,
        iterations: a.iterations.unwrap_or(defaults.iterations),
        batch_size,
        max_nan_restarts: a.max_nan_restarts.unwrap_or(defaults.max_nan_restarts),
        seed: g.seed,
        moa_sigma_coef: moa_coef,
        lr: a.lr.unwrap_or(defaults.lr),
        standardize_output: !a.no_standardize,
        keep_optimizer_state: !a.no_optimizer_state,
        arch,
        kde,
    };
    train.validate()?;
    Ok(TrainSettings {
        data,
        split,
        train,
        eval_kde: kde,
        eval_seed: derive_seed(g.seed, &[SEED_EVAL]),
        poison_init: a.poison_init,
        out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSettings {
    pub model: PathBuf,
    pub reset_optimizer: bool,
    #[serde(flatten)]
    pub common: TrainSettings,
}

pub fn resolve_transfer(a: &TransferArgs, g: &Globals, n_data: usize) -> Result<TransferSettings> {
    Ok(TransferSettings {
        model: absolute(a.model.as_deref().context("missing --model <pretrained.json>")?)?,
        reset_optimizer: a.reset_optimizer,
        common: resolve_train(&a.train, g, n_data)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub model: PathBuf,
    pub data: PathBuf,
    pub kde: KdeConfig,
    pub moa_coef: f64,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn resolve_eval(model: Option<&Path>, data: Option<&Path>, kde: &KdeArgs, g: &Globals) -> Result<EvalSettings> {
    let (kde, moa_coef) = kde_config(kde)?;
    Ok(EvalSettings {
        model: absolute(model.context("missing --model <model.json>")?)?,
        data: absolute(data.context("missing --data <dataset.csv>")?)?,
        kde,
        moa_coef,
        seed: g.seed,
        out: absolute(g.out.as_deref().context("missing --out <report.json>")?)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSettings {
    pub model: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub data: PathBuf,
    pub d: f64,
    pub kde: KdeConfig,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn resolve_plot(a: &PlotArgs, g: &Globals) -> Result<PlotSettings> {
    if a.model.is_some() == a.reference.is_some() {
        bail!("plot needs exactly one of --model or --reference");
    }
    let (kde, _) = kde_config(&a.kde)?;
    Ok(PlotSettings {
        model: a.model.as_deref().map(absolute).transpose()?,
        reference: a.reference.as_deref().map(absolute).transpose()?,
        data: absolute(a.data.as_deref().context("missing --data <dataset.csv>")?)?,
        d: a.d.context("missing --d <distance>")?,
        kde,
        seed: g.seed,
        out: absolute(g.out.as_deref().context("missing --out <figure.svg>")?)?,
    })
}
