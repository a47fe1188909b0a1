//! Command-line flags. Every per-command flag set doubles as a config-file
//! section, with the same names in snake_case.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "dmdn", version, about = "Mixture density network channel models")]
pub struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with defaults for any flag (flags win).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Use full-size data, split and batch defaults instead of desk-scale ones.
    #[arg(long, global = true)]
    pub paper_scale: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a measurement campaign and write a dataset CSV.
    Generate(GenerateArgs),
    /// Train models from random initialization.
    Train(TrainArgs),
    /// Train models starting from an existing model.
    Transfer(TransferArgs),
    /// Evaluate a model against a genuine dataset.
    Eval(EvalArgs),
    /// Draw genuine and generated densities at one distance.
    Plot(PlotArgs),
    /// Re-run a command from its manifest and compare the outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleArg {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainArg {
    Native,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaArg {
    Softplus,
    Exp,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct KdeArgs {
    /// KDE bandwidth (a factor of the sample std, or absolute width).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, value_enum)]
    pub bandwidth_rule: Option<RuleArg>,
    /// Grid points are min(n_a, n_b) / divisor.
    #[arg(long)]
    pub grid_divisor: Option<usize>,
    /// Sigma multiple subtracted in MOA.
    #[arg(long)]
    pub moa_coef: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct GenerateArgs {
    /// Built-in scenario: n1, n2, ln1 or ln2.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Scenario definition file (TOML or JSON) instead of a built-in.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long)]
    pub n_per_d: Option<usize>,
    /// Noise mean; enables noise.
    #[arg(long)]
    pub noise_mean: Option<f64>,
    /// Noise variance; enables noise.
    #[arg(long)]
    pub noise_var: Option<f64>,
    #[arg(long, value_enum)]
    pub noise_domain: Option<DomainArg>,
    /// Disable noise whatever the scenario says.
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_nan_restarts: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub units: Option<usize>,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long, value_enum)]
    pub sigma_activation: Option<SigmaArg>,
    /// Train on raw scaled targets without the fitted output affine.
    #[arg(long)]
    pub no_standardize: bool,
    /// Leave Adam state out of saved models.
    #[arg(long)]
    pub no_optimizer_state: bool,
    /// Overflow one initial weight of the first iteration (watchdog check).
    #[arg(long, hide = true)]
    pub poison_init: bool,
    #[command(flatten)]
    pub kde: KdeArgs,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct TransferArgs {
    /// Pretrained model document.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Start from a fresh optimizer instead of the saved Adam state.
    #[arg(long)]
    pub reset_optimizer: bool,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub kde: KdeArgs,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct PlotArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Second genuine dataset drawn in place of model samples.
    #[arg(long, conflicts_with = "model")]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Distance in metres; must be on the dataset grid.
    #[arg(long)]
    pub d: Option<f64>,
    #[command(flatten)]
    pub kde: KdeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier command.
    pub manifest: PathBuf,
}

/// Layout of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paper_scale: Option<bool>,
    pub generate: GenerateArgs,
    pub train: TrainArgs,
    pub transfer: TransferArgs,
    pub eval: EvalArgs,
    pub plot: PlotArgs,
}
